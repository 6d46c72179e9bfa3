//! Experiment settings: command-line flags merged over a `key = value` file.

use clap::{Args, Parser, Subcommand};
use negsob::mesh::{builtin, read_mesh, Mesh, MeshHierarchy};
use negsob::precond::WeightMode;
use negsob::Variant;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "negsob", version, about = "Multilevel norms and preconditioners for negative-order Sobolev spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Mesh,
    Norm,
    Precond,
    Split,
    Bench,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a hierarchy, audit it and optionally write the meshes.
    Mesh(Flags),
    /// Multilevel, oracle and Oswald norms of test functions.
    Norm(Flags),
    /// Condition numbers and PCG iterations of the preconditioned operator.
    Precond(Flags),
    /// Stability of the constructive splitting.
    Split(Flags),
    /// Operation counts and timings of one apply and one norm evaluation.
    Bench(Flags),
}

impl Command {
    pub fn parts(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Mesh(f) => (CommandKind::Mesh, f),
            Command::Norm(f) => (CommandKind::Norm, f),
            Command::Precond(f) => (CommandKind::Precond, f),
            Command::Split(f) => (CommandKind::Split, f),
            Command::Bench(f) => (CommandKind::Bench, f),
        }
    }
}

/// Flags shared by all commands; each may also come from `--config`.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Builtin initial mesh: square2, square4 or lshape6.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Initial mesh file.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Number of uniform refinement levels.
    #[arg(long)]
    pub uniform: Option<usize>,
    /// Corner point `x,y` for graded refinement.
    #[arg(long)]
    pub adaptive_corner: Option<String>,
    /// Refinement steps of the graded hierarchy.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Stop graded refinement once this many elements are reached.
    #[arg(long)]
    pub target: Option<usize>,
    /// Comma-separated finest levels for level studies.
    #[arg(long)]
    pub levels: Option<String>,
    /// Comma-separated values of s in (0, 1).
    #[arg(long)]
    pub s: Option<String>,
    /// plain or tilde.
    #[arg(long)]
    pub variant: Option<String>,
    /// surrogate or exact.
    #[arg(long)]
    pub weight_mode: Option<String>,
    /// Use the full coarse space with its s-Gram inverse.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub coarse_space: Option<bool>,
    /// Extra refinements of the oracle mesh.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of random test functions
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the first random test function
    #[arg(long)]
    pub seed: Option<u64>,
    /// random, constant or atom:<level>,<facet>.
    #[arg(long)]
    pub phi: Option<String>,
    /// Dense SPD matrix file replacing the oracle operator.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Also report the unpreconditioned operator.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub control: Option<bool>,
    /// Directory for the level meshes (mesh command).
    #[arg(long)]
    pub mesh_dir: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Usage or configuration error (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected `key = value`", i + 1));
        };
        let key = k.trim().replace('-', "_");
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return usage(format!("config line {}: duplicate key `{key}`", i + 1));
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, UsageError> {
    v.parse()
        .map_err(|_| UsageError(format!("invalid value `{v}` for `{key}`")))
}

impl Flags {
    /// Fills unset fields from the config file.
    pub fn merge_config(&mut self) -> Result<(), UsageError> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        for (k, v) in parse_config(&text)? {
            let v = v.as_str();
            macro_rules! fill {
                ($field:ident) => {
                    if self.$field.is_none() {
                        self.$field = Some(parse_value(&k, v)?);
                    }
                };
            }
            match k.as_str() {
                "builtin" => fill!(builtin),
                "mesh" => fill!(mesh),
                "uniform" => fill!(uniform),
                "adaptive_corner" => fill!(adaptive_corner),
                "steps" => fill!(steps),
                "target" => fill!(target),
                "levels" => fill!(levels),
                "s" => fill!(s),
                "variant" => fill!(variant),
                "weight_mode" => fill!(weight_mode),
                "coarse_space" => fill!(coarse_space),
                "depth" => fill!(depth),
                "samples" => fill!(samples),
                "seed" => fill!(seed),
                "phi" => fill!(phi),
                "matrix" => fill!(matrix),
                "control" => fill!(control),
                "mesh_dir" => fill!(mesh_dir),
                "output" => fill!(output),
                other => return usage(format!("unknown config key `{other}`")),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Uniform(usize),
    Corner { corner: [f64; 2], steps: usize, target: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhiSource {
    Random,
    Constant,
    Atom { level: usize, facet: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weights {
    Surrogate,
    Exact,
}

/// Validated settings.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub mesh0: Mesh,
    pub plan: Plan,
    pub levels: Vec<usize>,
    pub s: Vec<f64>,
    pub variant: Variant,
    pub weights: Weights,
    pub coarse_space: bool,
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
    pub phi: PhiSource,
    pub matrix: Option<PathBuf>,
    pub control: bool,
    pub mesh_dir: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Graded refinement uses this marking radius factor.
pub const CORNER_RADIUS_FACTOR: f64 = 0.5;

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, UsageError> {
    v.split(',').map(|t| parse_value(key, t.trim())).collect()
}

impl ExperimentConfig {
    pub fn from_flags(command: CommandKind, f: &Flags) -> Result<Self, UsageError> {
        let mesh0 = match (&f.builtin, &f.mesh) {
            (Some(_), Some(_)) => return usage("give either --builtin or --mesh, not both"),
            (Some(name), None) => builtin(name).map_err(|e| UsageError(e.to_string()))?,
            (None, Some(path)) => read_mesh(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?,
            (None, None) => builtin("square2").expect("builtin square2"),
        };
        let plan = match (&f.adaptive_corner, f.uniform) {
            (Some(_), Some(_)) => return usage("give either --uniform or --adaptive-corner, not both"),
            (Some(c), None) => {
                let xy: Vec<f64> = parse_list("adaptive_corner", c)?;
                if xy.len() != 2 {
                    return usage("--adaptive-corner takes `x,y`");
                }
                let Some(steps) = f.steps else {
                    return usage("--adaptive-corner needs --steps");
                };
                Plan::Corner {
                    corner: [xy[0], xy[1]],
                    steps,
                    target: f.target.unwrap_or(usize::MAX),
                }
            }
            (None, Some(l)) => Plan::Uniform(l),
            (None, None) => return usage("no refinement plan: give --uniform L or --adaptive-corner x,y --steps N"),
        };
        let levels = match (&f.levels, &plan) {
            (Some(v), Plan::Uniform(_)) => parse_list("levels", v)?,
            (Some(_), Plan::Corner { .. }) => return usage("--levels applies to uniform plans only"),
            (None, Plan::Uniform(l)) => match command {
                CommandKind::Precond | CommandKind::Bench => (0..=*l).collect(),
                _ => vec![*l],
            },
            (None, Plan::Corner { .. }) => vec![],
        };
        if let Plan::Uniform(l) = plan {
            if levels.is_empty() || levels.iter().any(|&x| x > l) {
                return usage(format!("levels must be a non-empty subset of 0..={l}"));
            }
        }
        let s: Vec<f64> = match &f.s {
            Some(v) => parse_list("s", v)?,
            None => vec![0.5],
        };
        if s.is_empty() || s.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return usage("every s must lie in (0, 1)");
        }
        let variant: Variant = f
            .variant
            .as_deref()
            .unwrap_or("plain")
            .parse()
            .map_err(|e: negsob::Error| UsageError(e.to_string()))?;
        let weights = match f.weight_mode.as_deref().unwrap_or("surrogate") {
            "surrogate" => Weights::Surrogate,
            "exact" => Weights::Exact,
            other => return usage(format!("unknown weight mode `{other}` (expected surrogate or exact)")),
        };
        let phi = match f.phi.as_deref().unwrap_or("random") {
            "random" => PhiSource::Random,
            "constant" => PhiSource::Constant,
            other => match other.strip_prefix("atom:") {
                Some(rest) => {
                    let v: Vec<usize> = parse_list("phi", rest)?;
                    if v.len() != 2 {
                        return usage("--phi atom:<level>,<facet>");
                    }
                    PhiSource::Atom { level: v[0], facet: v[1] }
                }
                None => return usage(format!("unknown phi source `{other}`")),
            },
        };
        let depth = f.depth.unwrap_or(negsob::fem_oracles::DEFAULT_DEPTH);
        if depth > negsob::fem_oracles::MAX_DEPTH {
            return usage(format!("oracle depth at most {}", negsob::fem_oracles::MAX_DEPTH));
        }
        let samples = f.samples.unwrap_or(10);
        if samples == 0 {
            return usage("--samples must be positive");
        }
        if f.matrix.is_some() && command != CommandKind::Precond {
            return usage("--matrix applies to the precond command only");
        }
        Ok(Self {
            command,
            mesh0,
            plan,
            levels,
            s,
            variant,
            weights,
            coarse_space: f.coarse_space.unwrap_or(false),
            depth,
            samples,
            seed: f.seed.unwrap_or(1),
            phi,
            matrix: f.matrix.clone(),
            control: f.control.unwrap_or(false),
            mesh_dir: f.mesh_dir.clone(),
            output: f.output.clone(),
        })
    }

    /// The hierarchy of the plan, truncated at `finest` for uniform plans.
    pub fn hierarchy(&self, finest: Option<usize>) -> negsob::Result<MeshHierarchy> {
        match self.plan {
            Plan::Uniform(l) => MeshHierarchy::uniform(self.mesh0.clone(), finest.unwrap_or(l)),
            Plan::Corner { corner, steps, target } => {
                MeshHierarchy::corner_adaptive(self.mesh0.clone(), corner, CORNER_RADIUS_FACTOR, target, steps)
            }
        }
    }

    /// Finest levels to study: the level list (uniform) or the graded hierarchy.
    pub fn finest_levels(&self) -> Vec<Option<usize>> {
        match self.plan {
            Plan::Uniform(_) => self.levels.iter().map(|&l| Some(l)).collect(),
            Plan::Corner { .. } => vec![None],
        }
    }

    pub fn weight_mode<'a>(&self, op: &'a dyn negsob::linalg::LinearOperator) -> WeightMode<'a> {
        match self.weights {
            Weights::Surrogate => WeightMode::Surrogate,
            Weights::Exact => WeightMode::Exact(op),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let m = parse_config("# c\nuniform = 3\n s = 0.25,0.5 # tail\nweight-mode=exact\n").unwrap();
        assert_eq!(m["uniform"], "3");
        assert_eq!(m["s"], "0.25,0.5");
        assert_eq!(m["weight_mode"], "exact");
        assert!(parse_config("uniform 3").is_err());
        assert!(parse_config("a = 1\na = 2").is_err());
    }

    #[test]
    fn validation() {
        let mut f = Flags {
            uniform: Some(2),
            ..Default::default()
        };
        let c = ExperimentConfig::from_flags(CommandKind::Precond, &f).unwrap();
        assert_eq!(c.levels, vec![0, 1, 2]);
        f.s = Some("0.5,1.0".into());
        assert!(ExperimentConfig::from_flags(CommandKind::Norm, &f).is_err());
        f.s = None;
        f.levels = Some("3".into());
        assert!(ExperimentConfig::from_flags(CommandKind::Norm, &f).is_err());
        let none = Flags::default();
        assert!(ExperimentConfig::from_flags(CommandKind::Bench, &none).is_err());
    }
}
