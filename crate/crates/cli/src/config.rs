//! Scenario files: flat `key = value` lines under `[body]`, `[dynamics]`
//! and `[outputs]` headers. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rigidcirc::dynamics::{Integrator, PhaseSpace};
use rigidcirc::geometry::Shape;
use rigidcirc::potential::ASYMMETRY_TOLERANCE;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, PartialEq)]
pub struct BodySection {
    pub shape: Shape,
    pub panels: usize,
    pub density: f64,
    /// Largest accepted relative asymmetry of the raw added-mass matrix.
    pub asymmetry_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsSection {
    pub circulation: f64,
    pub dt: f64,
    pub steps: usize,
    pub integrator: Integrator,
    /// `(Pi, Px, Py)`.
    pub momentum: [f64; 3],
    /// `(theta, x0, y0)`.
    pub pose: [f64; 3],
    pub space: PhaseSpace,
}

/// Rectangular body-frame sampling grid, `nx * ny` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<(f64, f64)> {
        let axis = |[lo, hi]: [f64; 2], n: usize, k: usize| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| (axis(self.x, self.nx, i), axis(self.y, self.ny, j)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputsSection {
    pub trajectory: String,
    pub summary: String,
    pub leaves: String,
    pub field: String,
    pub added_mass: String,
    pub grid: Grid,
    /// Trajectory instants at which the field is sampled.
    pub field_times: Vec<f64>,
    /// Number of Casimir levels, centered on the initial value.
    pub leaf_levels: usize,
    pub leaf_spacing: f64,
    /// Traces cover `|Px| <= leaf_px_max`.
    pub leaf_px_max: f64,
    pub leaf_points: usize,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            trajectory: "trajectory.csv".into(),
            summary: "summary.txt".into(),
            leaves: "leaves.csv".into(),
            field: "field.csv".into(),
            added_mass: "added_mass.txt".into(),
            grid: Grid {
                x: [-3.0, 3.0],
                y: [-3.0, 3.0],
                nx: 41,
                ny: 41,
            },
            field_times: vec![0.0],
            leaf_levels: 7,
            leaf_spacing: 0.5,
            leaf_px_max: 2.0,
            leaf_points: 81,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioFile {
    pub body: BodySection,
    pub dynamics: DynamicsSection,
    pub outputs: OutputsSection,
}

struct Entry {
    line: usize,
    value: String,
}

/// Raw entries of one section, consumed key by key.
struct Section {
    name: String,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        let Some(entry) = self.entries.remove(key) else {
            return Ok(None);
        };
        entry
            .value
            .parse()
            .map(Some)
            .map_err(|e: T::Err| ConfigError::InvalidValue {
                line: entry.line,
                key: key.into(),
                message: e.to_string(),
            })
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.take(key)?.ok_or_else(|| ConfigError::MissingKey {
            section: self.name.clone(),
            key: key.into(),
        })
    }

    fn take_list<const N: usize>(&mut self, key: &str) -> Result<Option<[f64; N]>> {
        let Some(entry) = self.entries.remove(key) else {
            return Ok(None);
        };
        let invalid = |message: String| ConfigError::InvalidValue {
            line: entry.line,
            key: key.into(),
            message,
        };
        let values = parse_floats(&entry.value).map_err(invalid)?;
        values.try_into().map(Some).map_err(|v: Vec<f64>| {
            invalid(format!(
                "expected {N} comma-separated numbers, got {}",
                v.len()
            ))
        })
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            Some((key, entry)) => Err(ConfigError::UnknownKey {
                line: entry.line,
                section: self.name,
                key,
            }),
            None => Ok(()),
        }
    }
}

fn parse_floats(text: &str) -> std::result::Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("`{}`: {e}", s.trim()))
        })
        .collect()
}

const SECTIONS: [&str; 3] = ["body", "dynamics", "outputs"];

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            if sections.contains_key(name) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("section [{name}] appears twice"),
                });
            }
            sections.insert(
                name.into(),
                Section {
                    name: name.into(),
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name.into());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let Some(section) = current.as_ref().and_then(|c| sections.get_mut(c)) else {
            return Err(ConfigError::Syntax {
                line,
                message: "key outside of any section".into(),
            });
        };
        let key = key.trim().to_string();
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if section.entries.insert(key.clone(), entry).is_some() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(sections)
}

fn parse_shape(section: &mut Section) -> Result<Shape> {
    let line = section.entries.get("shape").map(|e| e.line);
    let kind: String = section.require("shape")?;
    match kind.as_str() {
        "circle" => Ok(Shape::Circle {
            radius: section.require("radius")?,
        }),
        "ellipse" => Ok(Shape::Ellipse {
            a: section.require("a")?,
            b: section.require("b")?,
        }),
        "joukowski" => Ok(Shape::Joukowski {
            circle_radius: section.require("circle_radius")?,
            center: section.take_list("center")?.unwrap_or([0.0, 0.0]),
            c: section.take("c")?.unwrap_or(1.0),
        }),
        other => Err(ConfigError::InvalidValue {
            line: line.unwrap_or(0),
            key: "shape".into(),
            message: format!("unknown shape `{other}` (circle|ellipse|joukowski)"),
        }),
    }
}

impl FromStr for ScenarioFile {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self> {
        let mut sections = split_sections(text)?;
        let mut section = |name: &str| {
            sections
                .remove(name)
                .ok_or_else(|| ConfigError::MissingSection(name.into()))
        };

        let mut b = section("body")?;
        let body = BodySection {
            shape: parse_shape(&mut b)?,
            panels: b.require("panels")?,
            density: b.take("density")?.unwrap_or(1.0),
            asymmetry_tolerance: b
                .take("asymmetry_tolerance")?
                .unwrap_or(ASYMMETRY_TOLERANCE),
        };
        b.finish()?;

        let mut d = section("dynamics")?;
        let dynamics = DynamicsSection {
            circulation: d.require("circulation")?,
            dt: d.require("dt")?,
            steps: d.require("steps")?,
            integrator: d.take("integrator")?.unwrap_or_default(),
            momentum: d
                .take_list("momentum")?
                .ok_or_else(|| ConfigError::MissingKey {
                    section: "dynamics".into(),
                    key: "momentum".into(),
                })?,
            pose: d.take_list("pose")?.unwrap_or([0.0; 3]),
            space: d.take("space")?.unwrap_or_default(),
        };
        d.finish()?;

        let mut outputs = OutputsSection::default();
        if let Ok(mut o) = section("outputs") {
            let defaults = OutputsSection::default();
            let grid_line = o.entries.get("grid").map(|e| e.line);
            outputs.trajectory = o.take("trajectory")?.unwrap_or(defaults.trajectory);
            outputs.summary = o.take("summary")?.unwrap_or(defaults.summary);
            outputs.leaves = o.take("leaves")?.unwrap_or(defaults.leaves);
            outputs.field = o.take("field")?.unwrap_or(defaults.field);
            outputs.added_mass = o.take("added_mass")?.unwrap_or(defaults.added_mass);
            if let Some([x0, x1, y0, y1, nx, ny]) = o.take_list::<6>("grid")? {
                let count = |v: f64| (v >= 1.0 && v.fract() == 0.0).then_some(v as usize);
                let (Some(nx), Some(ny)) = (count(nx), count(ny)) else {
                    return Err(ConfigError::InvalidValue {
                        line: grid_line.unwrap_or(0),
                        key: "grid".into(),
                        message: "point counts must be positive integers".into(),
                    });
                };
                outputs.grid = Grid {
                    x: [x0, x1],
                    y: [y0, y1],
                    nx,
                    ny,
                };
            }
            if let Some(entry) = o.entries.remove("field_times") {
                outputs.field_times =
                    parse_floats(&entry.value).map_err(|message| ConfigError::InvalidValue {
                        line: entry.line,
                        key: "field_times".into(),
                        message,
                    })?;
            }
            outputs.leaf_levels = o.take("leaf_levels")?.unwrap_or(defaults.leaf_levels);
            outputs.leaf_spacing = o.take("leaf_spacing")?.unwrap_or(defaults.leaf_spacing);
            outputs.leaf_px_max = o.take("leaf_px_max")?.unwrap_or(defaults.leaf_px_max);
            outputs.leaf_points = o.take("leaf_points")?.unwrap_or(defaults.leaf_points);
            o.finish()?;
        }
        Ok(ScenarioFile {
            body,
            dynamics,
            outputs,
        })
    }
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes every key explicitly; parsing the result gives back an equal value.
impl fmt::Display for ScenarioFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.body;
        writeln!(f, "[body]")?;
        match &b.shape {
            Shape::Circle { radius } => writeln!(f, "shape = circle\nradius = {radius}")?,
            Shape::Ellipse { a, b } => writeln!(f, "shape = ellipse\na = {a}\nb = {b}")?,
            Shape::Joukowski {
                circle_radius,
                center,
                c,
            } => writeln!(
                f,
                "shape = joukowski\ncircle_radius = {circle_radius}\ncenter = {}\nc = {c}",
                list(center)
            )?,
        }
        writeln!(f, "panels = {}", b.panels)?;
        writeln!(f, "density = {}", b.density)?;
        writeln!(f, "asymmetry_tolerance = {}", b.asymmetry_tolerance)?;

        let d = &self.dynamics;
        writeln!(f, "\n[dynamics]")?;
        writeln!(f, "circulation = {}", d.circulation)?;
        writeln!(f, "dt = {}", d.dt)?;
        writeln!(f, "steps = {}", d.steps)?;
        writeln!(f, "integrator = {}", d.integrator)?;
        writeln!(f, "momentum = {}", list(&d.momentum))?;
        writeln!(f, "pose = {}", list(&d.pose))?;
        writeln!(f, "space = {}", d.space)?;

        let o = &self.outputs;
        let g = &o.grid;
        writeln!(f, "\n[outputs]")?;
        writeln!(f, "trajectory = {}", o.trajectory)?;
        writeln!(f, "summary = {}", o.summary)?;
        writeln!(f, "leaves = {}", o.leaves)?;
        writeln!(f, "field = {}", o.field)?;
        writeln!(f, "added_mass = {}", o.added_mass)?;
        writeln!(
            f,
            "grid = {}",
            list(&[g.x[0], g.x[1], g.y[0], g.y[1], g.nx as f64, g.ny as f64])
        )?;
        writeln!(f, "field_times = {}", list(&o.field_times))?;
        writeln!(f, "leaf_levels = {}", o.leaf_levels)?;
        writeln!(f, "leaf_spacing = {}", o.leaf_spacing)?;
        writeln!(f, "leaf_px_max = {}", o.leaf_px_max)?;
        writeln!(f, "leaf_points = {}", o.leaf_points)
    }
}
