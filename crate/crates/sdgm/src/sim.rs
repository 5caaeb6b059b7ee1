//! Synthetic multivariate point patterns with known dependence structure.
//!
//! Each type is a superposition of independent Poisson components and
//! cluster components. Cluster components that name the same parent group
//! scatter offspring around one shared realized parent set, which is what
//! induces cross-type dependence; distinct groups are independent.
//!
//! Randomness comes from ChaCha8 seeded with the spec's 64-bit seed, so a
//! spec reproduces the same pattern on every platform.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::pattern::{Event, MultiTypePointPattern, ObservationWindow};

/// One generating component of a type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    /// Homogeneous Poisson with the given intensity on the unit square.
    Poisson { intensity: f64 },
    /// Offspring of the shared parent set of `parent_group`: per parent a
    /// Poisson(mean_offspring) count, displaced by an isotropic Gaussian
    /// with standard deviation sigma and wrapped toroidally.
    Cluster {
        parent_intensity: f64,
        mean_offspring: f64,
        sigma: f64,
        parent_group: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpec {
    pub label: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub seed: u64,
    pub types: Vec<TypeSpec>,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.types.is_empty() {
            return Err(Error::Validation("simulation spec has no types".into()));
        }
        let mut labels = BTreeSet::new();
        let mut group_rho: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &self.types {
            if t.label.is_empty() {
                return Err(Error::Validation("empty type label".into()));
            }
            if !labels.insert(t.label.as_str()) {
                return Err(Error::Validation(format!("duplicate type label '{}'", t.label)));
            }
            if t.components.is_empty() {
                return Err(Error::Validation(format!(
                    "type '{}' has no generating components",
                    t.label
                )));
            }
            for c in &t.components {
                match *c {
                    Component::Poisson { intensity } => {
                        if !(intensity > 0.0) {
                            return Err(Error::Validation(format!(
                                "type '{}': poisson intensity must be positive",
                                t.label
                            )));
                        }
                    }
                    Component::Cluster {
                        parent_intensity,
                        mean_offspring,
                        sigma,
                        parent_group,
                    } => {
                        if !(parent_intensity > 0.0 && mean_offspring > 0.0 && sigma > 0.0) {
                            return Err(Error::Validation(format!(
                                "type '{}': cluster parameters must be positive",
                                t.label
                            )));
                        }
                        if let Some(&rho) = group_rho.get(&parent_group) {
                            if rho != parent_intensity {
                                return Err(Error::Validation(format!(
                                    "parent group {parent_group} declared with conflicting \
                                     parent intensities {rho} and {parent_intensity}"
                                )));
                            }
                        } else {
                            group_rho.insert(parent_group, parent_intensity);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Distinct parent groups with their intensities, in ascending id order.
    fn parent_groups(&self) -> BTreeMap<u32, f64> {
        let mut groups = BTreeMap::new();
        for t in &self.types {
            for c in &t.components {
                if let Component::Cluster { parent_intensity, parent_group, .. } = *c {
                    groups.entry(parent_group).or_insert(parent_intensity);
                }
            }
        }
        groups
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    Poisson::new(mean).expect("validated mean").sample(rng) as usize
}

/// Draws one pattern on the unit square. Deterministic in the seed.
pub fn simulate(spec: &SimSpec) -> Result<MultiTypePointPattern> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // realize shared parent sets first, in group-id order
    let mut parents: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for (&group, &rho) in &spec.parent_groups() {
        let n = poisson_count(&mut rng, rho);
        let pts = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        parents.insert(group, pts);
    }

    let mut events = Vec::new();
    for (type_index, t) in spec.types.iter().enumerate() {
        for c in &t.components {
            match *c {
                Component::Poisson { intensity } => {
                    let n = poisson_count(&mut rng, intensity);
                    for _ in 0..n {
                        events.push(Event {
                            x: rng.random::<f64>(),
                            y: rng.random::<f64>(),
                            type_index,
                        });
                    }
                }
                Component::Cluster { mean_offspring, sigma, parent_group, .. } => {
                    let normal = Normal::new(0.0, sigma).expect("validated sigma");
                    for &(px, py) in &parents[&parent_group] {
                        let k = poisson_count(&mut rng, mean_offspring);
                        for _ in 0..k {
                            let x = (px + normal.sample(&mut rng)).rem_euclid(1.0);
                            let y = (py + normal.sample(&mut rng)).rem_euclid(1.0);
                            events.push(Event { x, y, type_index });
                        }
                    }
                }
            }
        }
    }

    let labels = spec.types.iter().map(|t| t.label.clone()).collect();
    MultiTypePointPattern::new(ObservationWindow::unit_square(), labels, events).map_err(|e| {
        Error::Validation(format!("simulated pattern invalid (empty type?): {e}"))
    })
}

/// Ground-truth edges: two types are linked iff they share a parent group.
pub fn structure_of(spec: &SimSpec) -> BTreeSet<(usize, usize)> {
    let groups_of = |t: &TypeSpec| -> BTreeSet<u32> {
        t.components
            .iter()
            .filter_map(|c| match c {
                Component::Cluster { parent_group, .. } => Some(*parent_group),
                Component::Poisson { .. } => None,
            })
            .collect()
    };
    let mut edges = BTreeSet::new();
    for i in 0..spec.types.len() {
        for j in (i + 1)..spec.types.len() {
            if !groups_of(&spec.types[i]).is_disjoint(&groups_of(&spec.types[j])) {
                edges.insert((i, j));
            }
        }
    }
    edges
}

/// Parses the flat key/value spec format:
///
/// ```text
/// seed = 42
/// type.a = poisson(300)
/// type.b = cluster(rho=150, mu=2, sigma=0.02, group=1) + poisson(50)
/// ```
pub fn parse_sim_spec(text: &str) -> Result<SimSpec> {
    let mut seed: Option<u64> = None;
    let mut types = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: "expected 'key = value'".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "seed" {
            seed = Some(value.parse().map_err(|e| Error::Parse {
                line,
                message: format!("bad seed '{value}': {e}"),
            })?);
        } else if let Some(label) = key.strip_prefix("type.") {
            let components = value
                .split('+')
                .map(|part| parse_component(part.trim(), line))
                .collect::<Result<Vec<_>>>()?;
            types.push(TypeSpec { label: label.trim().to_string(), components });
        } else {
            return Err(Error::Parse { line, message: format!("unknown key '{key}'") });
        }
    }
    let spec = SimSpec { seed: seed.unwrap_or(0), types };
    spec.validate()?;
    Ok(spec)
}

fn parse_component(text: &str, line: usize) -> Result<Component> {
    let err = |message: String| Error::Parse { line, message };
    let open = text.find('(').ok_or_else(|| err(format!("bad component '{text}'")))?;
    if !text.ends_with(')') {
        return Err(err(format!("bad component '{text}'")));
    }
    let name = text[..open].trim();
    let args_text = &text[open + 1..text.len() - 1];
    let mut positional = Vec::new();
    let mut named: BTreeMap<&str, &str> = BTreeMap::new();
    for piece in args_text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        match piece.split_once('=') {
            Some((k, v)) => {
                named.insert(k.trim(), v.trim());
            }
            None => positional.push(piece),
        }
    }
    let get = |key: &str, pos: usize| -> Option<&str> {
        named.get(key).copied().or_else(|| positional.get(pos).copied())
    };
    let num = |key: &str, pos: usize| -> Result<f64> {
        let raw = get(key, pos).ok_or_else(|| err(format!("missing '{key}' in '{text}'")))?;
        raw.parse().map_err(|e| err(format!("bad value for '{key}': {e}")))
    };
    match name {
        "poisson" => Ok(Component::Poisson { intensity: num("lambda", 0)? }),
        "cluster" => Ok(Component::Cluster {
            parent_intensity: num("rho", 0)?,
            mean_offspring: num("mu", 1)?,
            sigma: num("sigma", 2)?,
            parent_group: num("group", 3)? as u32,
        }),
        other => Err(err(format!("unknown component '{other}'"))),
    }
}

/// Inverse of `parse_sim_spec`, for writing specs back out.
pub fn sim_spec_to_string(spec: &SimSpec) -> String {
    let mut out = format!("seed = {}\n", spec.seed);
    for t in &spec.types {
        let parts: Vec<String> = t
            .components
            .iter()
            .map(|c| match *c {
                Component::Poisson { intensity } => format!("poisson(lambda={intensity})"),
                Component::Cluster { parent_intensity, mean_offspring, sigma, parent_group } => {
                    format!(
                        "cluster(rho={parent_intensity}, mu={mean_offspring}, \
                         sigma={sigma}, group={parent_group})"
                    )
                }
            })
            .collect();
        out.push_str(&format!("type.{} = {}\n", t.label, parts.join(" + ")));
    }
    out
}
