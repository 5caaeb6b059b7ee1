//! Multi-type spatial point patterns: data model, CSV ingestion,
//! validation and unit-square normalization.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use crate::error::{Error, Result};

/// Rectangular observation window in input units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationWindow {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl ObservationWindow {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let w = Self { x_min, y_min, x_max, y_max };
        if !(w.width() > 0.0) || !(w.height() > 0.0) {
            return Err(Error::Validation(format!(
                "window must have positive side lengths, got {} x {}",
                w.width(),
                w.height()
            )));
        }
        Ok(w)
    }

    pub fn unit_square() -> Self {
        Self { x_min: 0.0, y_min: 0.0, x_max: 1.0, y_max: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed-boundary containment.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn is_unit_square(&self) -> bool {
        (self.x_min).abs() <= 1e-12
            && (self.y_min).abs() <= 1e-12
            && (self.x_max - 1.0).abs() <= 1e-12
            && (self.y_max - 1.0).abs() <= 1e-12
    }
}

/// One event: planar location plus a categorical type index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: f64,
    pub y: f64,
    pub type_index: usize,
}

/// A validated multi-type point pattern. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTypePointPattern {
    window: ObservationWindow,
    types: Vec<String>,
    events: Vec<Event>,
}

/// Counts reported by `load_pattern` about rows it adjusted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Exact (x, y, type) duplicate rows dropped.
    pub duplicates_dropped: usize,
    /// Events kept that share coordinates with an event of another type.
    pub cross_type_coincidences: usize,
}

/// Column names and optional overrides for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub x_column: String,
    pub y_column: String,
    pub type_column: String,
    /// Window to validate against; bounding box of the events when absent.
    pub window: Option<ObservationWindow>,
    /// Explicit type order; first-appearance order when absent.
    pub types: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            x_column: "x".into(),
            y_column: "y".into(),
            type_column: "type".into(),
            window: None,
            types: None,
        }
    }
}

impl MultiTypePointPattern {
    /// Validates window membership, per-type counts and the duplicate rule.
    pub fn new(
        window: ObservationWindow,
        types: Vec<String>,
        events: Vec<Event>,
    ) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Validation("pattern needs at least one type".into()));
        }
        let mut distinct = HashSet::new();
        for t in &types {
            if !distinct.insert(t.as_str()) {
                return Err(Error::Validation(format!("duplicate type label '{t}'")));
            }
        }
        let mut counts = vec![0usize; types.len()];
        let mut seen = HashSet::new();
        for (k, ev) in events.iter().enumerate() {
            if ev.type_index >= types.len() {
                return Err(Error::Validation(format!(
                    "event {k} has type index {} out of range (d={})",
                    ev.type_index,
                    types.len()
                )));
            }
            if !window.contains(ev.x, ev.y) {
                return Err(Error::Validation(format!(
                    "event {k} at ({}, {}) lies outside the window",
                    ev.x, ev.y
                )));
            }
            if !seen.insert((ev.x.to_bits(), ev.y.to_bits(), ev.type_index)) {
                return Err(Error::Validation(format!(
                    "duplicate event {k} at ({}, {}) of type '{}'",
                    ev.x, ev.y, types[ev.type_index]
                )));
            }
            counts[ev.type_index] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            if *c == 0 {
                return Err(Error::Validation(format!(
                    "type '{}' has no events",
                    types[i]
                )));
            }
        }
        Ok(Self { window, types, events })
    }

    pub fn window(&self) -> &ObservationWindow {
        &self.window
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn dimension(&self) -> usize {
        self.types.len()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn type_index(&self, label: &str) -> Option<usize> {
        self.types.iter().position(|t| t == label)
    }

    /// Event count per type, in type order.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.types.len()];
        for ev in &self.events {
            counts[ev.type_index] += 1;
        }
        counts
    }

    /// Locations of events of one type.
    pub fn locations_of(&self, type_index: usize) -> Vec<(f64, f64)> {
        self.events
            .iter()
            .filter(|e| e.type_index == type_index)
            .map(|e| (e.x, e.y))
            .collect()
    }

    /// Homogeneous intensity estimate: n_i divided by the window area.
    pub fn estimate_intensity(&self, type_index: usize) -> Result<f64> {
        if type_index >= self.types.len() {
            return Err(Error::Validation(format!(
                "type index {type_index} out of range (d={})",
                self.types.len()
            )));
        }
        Ok(self.counts()[type_index] as f64 / self.window.area())
    }

    /// Affine map of every event onto the unit square. Counts and type
    /// order are preserved; already-normalized patterns map to themselves.
    pub fn rescale_to_unit_square(&self) -> Self {
        let w = self.window;
        let events = self
            .events
            .iter()
            .map(|e| Event {
                x: ((e.x - w.x_min) / w.width()).clamp(0.0, 1.0),
                y: ((e.y - w.y_min) / w.height()).clamp(0.0, 1.0),
                type_index: e.type_index,
            })
            .collect();
        Self {
            window: ObservationWindow::unit_square(),
            types: self.types.clone(),
            events,
        }
    }
}

/// Reads a pattern from CSV with a header row. Exact duplicate rows are
/// dropped (and counted); rows outside a declared window are rejected.
pub fn load_pattern<R: Read>(
    source: R,
    schema: &CsvSchema,
) -> Result<(MultiTypePointPattern, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}' in header"),
        })
    };
    let xi = col(&schema.x_column)?;
    let yi = col(&schema.y_column)?;
    let ti = col(&schema.type_column)?;

    let mut types: Vec<String> = schema.types.clone().unwrap_or_default();
    let explicit_types = schema.types.is_some();
    let mut type_of: HashMap<String, usize> =
        types.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

    let mut events = Vec::new();
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    let mut coords: HashMap<(u64, u64), usize> = HashMap::new();

    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("row has only {} fields", record.len()),
            })
        };
        let x: f64 = field(xi)?.trim().parse().map_err(|e| Error::Parse {
            line,
            message: format!("bad x value '{}': {e}", field(xi).unwrap_or("")),
        })?;
        let y: f64 = field(yi)?.trim().parse().map_err(|e| Error::Parse {
            line,
            message: format!("bad y value '{}': {e}", field(yi).unwrap_or("")),
        })?;
        let label = field(ti)?.trim().to_string();
        if label.is_empty() {
            return Err(Error::Parse { line, message: "empty type label".into() });
        }
        if let Some(w) = &schema.window {
            if !w.contains(x, y) {
                return Err(Error::Validation(format!(
                    "row at line {line}: point ({x}, {y}) lies outside the declared window"
                )));
            }
        }
        let type_index = match type_of.get(&label) {
            Some(&i) => i,
            None => {
                if explicit_types {
                    return Err(Error::Validation(format!(
                        "row at line {line}: type '{label}' not in the supplied type list"
                    )));
                }
                let i = types.len();
                types.push(label.clone());
                type_of.insert(label, i);
                i
            }
        };
        if !seen.insert((x.to_bits(), y.to_bits(), type_index)) {
            report.duplicates_dropped += 1;
            continue;
        }
        if let Some(&other) = coords.get(&(x.to_bits(), y.to_bits())) {
            if other != type_index {
                report.cross_type_coincidences += 1;
            }
        } else {
            coords.insert((x.to_bits(), y.to_bits()), type_index);
        }
        events.push(Event { x, y, type_index });
    }

    if events.is_empty() {
        return Err(Error::Validation("no events after filtering".into()));
    }
    let window = match schema.window {
        Some(w) => w,
        None => bounding_box(&events)?,
    };
    let pattern = MultiTypePointPattern::new(window, types, events)?;
    Ok((pattern, report))
}

fn bounding_box(events: &[Event]) -> Result<ObservationWindow> {
    let mut x_min = f64::INFINITY;
    let mut y_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for e in events {
        x_min = x_min.min(e.x);
        y_min = y_min.min(e.y);
        x_max = x_max.max(e.x);
        y_max = y_max.max(e.y);
    }
    ObservationWindow::new(x_min, y_min, x_max, y_max).map_err(|_| {
        Error::Validation(
            "bounding-box window is degenerate; supply an explicit window".into(),
        )
    })
}
