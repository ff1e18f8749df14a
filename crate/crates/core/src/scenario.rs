//! Scenario names for the two grid worlds.
//!
//! Level-based foraging names look like `Foraging-2s-8x8-2p-2f-coop-v2`:
//!
//! ```text
//! Foraging[-<sight>s]-<w>x<h>-<agents>p-<food>f[-coop][-v<k>]
//! ```
//!
//! Warehouse names look like `rware-tiny-4ag-v1`:
//!
//! ```text
//! rware-<size>-<agents>ag[-<difficulty>][-v<k>]
//! ```
//!
//! Numbers must be written canonically (no sign, no leading zeros), which keeps
//! parsing injective: two distinct strings never produce the same [`Scenario`],
//! and [`Scenario::name`] inverts [`parse_scenario`] byte for byte.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("malformed scenario name {name:?}: {reason}")]
    MalformedName { name: String, reason: String },

    #[error("unknown environment prefix in {0:?} (expected `Foraging` or `rware`)")]
    UnknownEnvPrefix(String),

    #[error("warehouse size class `{0}` has no layout")]
    UnsupportedSizeClass(SizeClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    Lbf,
    Rware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Tiny,
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::Tiny => "tiny",
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        }
    }

    /// Grid dimensions `(width, height)`; only tiny and small maps are laid out.
    pub fn grid(self) -> Result<(u32, u32), ScenarioError> {
        match self {
            SizeClass::Tiny => Ok((11, 11)),
            SizeClass::Small => Ok((11, 20)),
            other => Err(ScenarioError::UnsupportedSizeClass(other)),
        }
    }

    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "tiny" => SizeClass::Tiny,
            "small" => SizeClass::Small,
            "medium" => SizeClass::Medium,
            "large" => SizeClass::Large,
            _ => return None,
        })
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Structured description of an environment task.
///
/// For warehouse scenarios `grid_w`/`grid_h` are zero when the size class has
/// no layout (medium, large); construction of the environment then fails.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub env_kind: EnvKind,
    pub grid_w: u32,
    pub grid_h: u32,
    pub n_agents: u32,
    /// Food items per episode (foraging only, zero for the warehouse).
    pub n_food: u32,
    /// Chebyshev sight radius; `None` means the whole grid is visible.
    pub sight: Option<u32>,
    pub coop: bool,
    pub size_class: Option<SizeClass>,
    pub difficulty: Option<String>,
    /// Version suffix without the leading dash, e.g. `v2`.
    pub version: Option<String>,
}

impl Scenario {
    /// A foraging scenario with the given layout and a `v2` suffix.
    pub fn lbf(grid: u32, n_agents: u32, n_food: u32, sight: Option<u32>, coop: bool) -> Self {
        Scenario {
            env_kind: EnvKind::Lbf,
            grid_w: grid,
            grid_h: grid,
            n_agents,
            n_food,
            sight,
            coop,
            size_class: None,
            difficulty: None,
            version: Some("v2".into()),
        }
    }

    /// A warehouse scenario with a `v1` suffix.
    pub fn rware(size: SizeClass, n_agents: u32) -> Self {
        let (grid_w, grid_h) = size.grid().unwrap_or((0, 0));
        Scenario {
            env_kind: EnvKind::Rware,
            grid_w,
            grid_h,
            n_agents,
            n_food: 0,
            sight: None,
            coop: false,
            size_class: Some(size),
            difficulty: None,
            version: Some("v1".into()),
        }
    }

    pub fn name(&self) -> String {
        render_scenario(self)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_scenario(self))
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scenario(s)
    }
}

/// The ten tasks used for the main benchmark, seven foraging and three warehouse.
pub const CATALOG: [&str; 10] = [
    "Foraging-2s-8x8-2p-2f-coop-v2",
    "Foraging-8x8-2p-2f-coop-v2",
    "Foraging-2s-10x10-3p-3f-v2",
    "Foraging-10x10-3p-3f-v2",
    "Foraging-15x15-3p-5f-v2",
    "Foraging-15x15-4p-3f-v2",
    "Foraging-15x15-4p-5f-v2",
    "rware-tiny-2ag-v1",
    "rware-tiny-4ag-v1",
    "rware-small-4ag-v1",
];

pub fn parse_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    if name.is_empty() {
        return Err(malformed(name, "empty name"));
    }
    let mut tokens = name.split('-');
    match tokens.next() {
        Some("Foraging") => parse_lbf(name, tokens.collect()),
        Some("rware") => parse_rware(name, tokens.collect()),
        _ => Err(ScenarioError::UnknownEnvPrefix(name.to_string())),
    }
}

pub fn render_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    match s.env_kind {
        EnvKind::Lbf => {
            out.push_str("Foraging");
            if let Some(sight) = s.sight {
                out.push_str(&format!("-{sight}s"));
            }
            out.push_str(&format!(
                "-{}x{}-{}p-{}f",
                s.grid_w, s.grid_h, s.n_agents, s.n_food
            ));
            if s.coop {
                out.push_str("-coop");
            }
        }
        EnvKind::Rware => {
            let size = s.size_class.unwrap_or(SizeClass::Tiny);
            out.push_str(&format!("rware-{}-{}ag", size, s.n_agents));
            if let Some(diff) = &s.difficulty {
                out.push('-');
                out.push_str(diff);
            }
        }
    }
    if let Some(v) = &s.version {
        out.push('-');
        out.push_str(v);
    }
    out
}

fn malformed(name: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::MalformedName {
        name: name.to_string(),
        reason: reason.into(),
    }
}

/// Positive integer in canonical decimal form.
fn positive(digits: &str) -> Option<u32> {
    let canonical = !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && !digits.starts_with('0');
    if canonical {
        digits.parse().ok()
    } else {
        None
    }
}

fn is_version(token: &str) -> bool {
    token
        .strip_prefix('v')
        .map(|rest| positive(rest).is_some())
        .unwrap_or(false)
}

/// Splits an optional trailing version token off the token list.
fn split_version(tokens: &mut Vec<&str>) -> Option<String> {
    match tokens.last() {
        Some(last) if is_version(last) => tokens.pop().map(str::to_string),
        _ => None,
    }
}

fn parse_lbf(name: &str, mut tokens: Vec<&str>) -> Result<Scenario, ScenarioError> {
    let version = split_version(&mut tokens);
    let coop = tokens.last() == Some(&"coop");
    if coop {
        tokens.pop();
    }

    let sight = match tokens.first() {
        Some(t) if t.ends_with('s') => {
            let s = positive(&t[..t.len() - 1])
                .ok_or_else(|| malformed(name, format!("bad sight segment `{t}`")))?;
            tokens.remove(0);
            Some(s)
        }
        _ => None,
    };

    let [grid, agents, food] = tokens.as_slice() else {
        return Err(malformed(
            name,
            "expected `<w>x<h>-<n>p-<f>f` after the optional sight segment",
        ));
    };

    let (w, h) = grid
        .split_once('x')
        .and_then(|(w, h)| Some((positive(w)?, positive(h)?)))
        .ok_or_else(|| malformed(name, format!("bad grid segment `{grid}`")))?;
    let n_agents = agents
        .strip_suffix('p')
        .and_then(positive)
        .ok_or_else(|| malformed(name, format!("bad agent segment `{agents}`")))?;
    let n_food = food
        .strip_suffix('f')
        .and_then(positive)
        .ok_or_else(|| malformed(name, format!("bad food segment `{food}`")))?;

    if let Some(s) = sight {
        if s > w.max(h) {
            return Err(malformed(name, format!("sight {s} exceeds grid size")));
        }
    }

    Ok(Scenario {
        env_kind: EnvKind::Lbf,
        grid_w: w,
        grid_h: h,
        n_agents,
        n_food,
        sight,
        coop,
        size_class: None,
        difficulty: None,
        version,
    })
}

fn parse_rware(name: &str, mut tokens: Vec<&str>) -> Result<Scenario, ScenarioError> {
    let version = split_version(&mut tokens);
    let difficulty = match tokens.last() {
        Some(&d @ ("easy" | "hard")) if tokens.len() == 3 => {
            tokens.pop();
            Some(d.to_string())
        }
        _ => None,
    };
    let [size, agents] = tokens.as_slice() else {
        return Err(malformed(name, "expected `<size>-<n>ag`"));
    };
    let size_class = SizeClass::parse(size)
        .ok_or_else(|| malformed(name, format!("unknown size class `{size}`")))?;
    let n_agents = agents
        .strip_suffix("ag")
        .and_then(positive)
        .ok_or_else(|| malformed(name, format!("bad agent segment `{agents}`")))?;
    let (grid_w, grid_h) = size_class.grid().unwrap_or((0, 0));

    Ok(Scenario {
        env_kind: EnvKind::Rware,
        grid_w,
        grid_h,
        n_agents,
        n_food: 0,
        sight: None,
        coop: false,
        size_class: Some(size_class),
        difficulty,
        version,
    })
}
