//! Command bodies. Each returns the CSV text and whether its checks passed;
//! nothing is written until the whole command has succeeded.

use crate::config::{ExperimentConfig, PhiSource};
use negsob::bench::{loglog_slope, measure_costs};
use negsob::fem_oracles::{NormOracle, DENSE_CAP};
use negsob::linalg::{LinearOperator, ScaledIdentity};
use negsob::mesh::{audit_hierarchy, write_mesh, MeshHierarchy};
use negsob::mlnorm::{multilevel_norm, oswald_norm, CSV_HEADER};
use negsob::model_problems::{build_sriesz, load_user_operator};
use negsob::precond::{build_precond, condition_study, CONDITION_CSV_HEADER};
use negsob::sampling::random_phi;
use negsob::spaces::{haar, prolong, P0Fn};
use negsob::splitting::{split_stability_report, SplitNorms, STABILITY_CSV_HEADER};
use negsob::{Error, Result};
use std::fmt::Write as _;

pub struct Outcome {
    pub csv: String,
    /// Files to write besides the CSV (mesh command).
    pub files: Vec<(std::path::PathBuf, String)>,
    pub passed: bool,
}

fn outcome(csv: String, passed: bool) -> Outcome {
    Outcome {
        csv,
        files: Vec::new(),
        passed,
    }
}

pub fn run_mesh(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.hierarchy(None)?;
    let (passed, c_reg) = match audit_hierarchy(&h) {
        Ok(r) => (true, r.c_reg_per_level),
        Err(Error::Audit(msg)) => {
            eprintln!("audit failed: {msg}");
            (false, vec![f64::NAN; h.num_levels()])
        }
        Err(e) => return Err(e),
    };
    let mut csv = String::from("level,elements,vertices,facets,new_elements,c_reg\n");
    for l in 0..h.num_levels() {
        let m = h.mesh(l);
        let _ = writeln!(
            csv,
            "{l},{},{},{},{},{:e}",
            m.num_elements(),
            m.num_vertices(),
            m.num_facets(),
            h.new_elements(l).len(),
            c_reg[l]
        );
    }
    eprintln!(
        "{} levels, {} triangles on level {}",
        h.num_levels(),
        h.finest().num_elements(),
        h.finest_level()
    );
    let mut out = outcome(csv, passed);
    if let Some(dir) = &cfg.mesh_dir {
        for l in 0..h.num_levels() {
            out.files.push((dir.join(format!("level_{l}.mesh")), write_mesh(h.mesh(l))));
        }
    }
    Ok(out)
}

fn oracle_if_small(h: &MeshHierarchy, cfg: &ExperimentConfig) -> Result<Option<NormOracle>> {
    if h.finest().num_elements() > DENSE_CAP {
        eprintln!("{} elements exceed the dense oracle cap {DENSE_CAP}; oracle columns left empty", h.finest().num_elements());
        return Ok(None);
    }
    NormOracle::new(h, cfg.variant, cfg.depth).map(Some)
}

fn test_functions(h: &MeshHierarchy, cfg: &ExperimentConfig) -> Result<Vec<P0Fn>> {
    let lf = h.finest_level();
    Ok(match cfg.phi {
        PhiSource::Random => (0..cfg.samples)
            .map(|i| random_phi(h, lf, cfg.seed.wrapping_add(i as u64), true))
            .collect(),
        PhiSource::Constant => vec![P0Fn::constant(h, lf, 1.0)],
        PhiSource::Atom { level, facet } => {
            let (_, p) = haar(h, level, facet)?;
            vec![prolong(h, &p, lf)?]
        }
    })
}

pub fn run_norm(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut csv = format!("{CSV_HEADER},sample,oracle_sq,ratio,oswald_ratio\n");
    for finest in cfg.finest_levels() {
        let h = cfg.hierarchy(finest)?;
        let oracle = oracle_if_small(&h, cfg)?;
        let phis = test_functions(&h, cfg)?;
        for &s in &cfg.s {
            for (i, phi) in phis.iter().enumerate() {
                let rep = multilevel_norm(&h, phi, s, cfg.variant)?;
                let oracle_sq = match &oracle {
                    Some(o) => Some(o.interp_norm_sq(&phi.coeffs, s)?),
                    None => None,
                };
                let oswald = if h.is_uniform() {
                    Some(oswald_norm(&h, phi, s)?.total)
                } else {
                    None
                };
                let (q, ratio, osw) = match oracle_sq {
                    Some(q) => (
                        format!("{q:e}"),
                        format!("{:e}", rep.total / q),
                        oswald.map_or(String::new(), |o| format!("{:e}", o / q)),
                    ),
                    None => (String::new(), String::new(), String::new()),
                };
                for row in rep.csv_rows() {
                    let _ = writeln!(csv, "{row},{i},{q},{ratio},{osw}");
                }
            }
        }
    }
    Ok(outcome(csv, true))
}

pub fn run_precond(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut csv = format!("{CONDITION_CSV_HEADER},preconditioner\n");
    let mut passed = true;
    for finest in cfg.finest_levels() {
        let h = cfg.hierarchy(finest)?;
        let lf = h.finest_level();
        let n = h.finest().num_elements();
        let user = match &cfg.matrix {
            Some(path) => {
                let u = load_user_operator(path, Some(n))?;
                if let Some(w) = &u.warning {
                    eprintln!("warning: {w}");
                }
                Some(u)
            }
            None => None,
        };
        let oracle = if user.is_none() {
            if n > DENSE_CAP {
                return Err(Error::OracleTooLarge { dofs: n, cap: DENSE_CAP });
            }
            Some(NormOracle::new(&h, cfg.variant, cfg.depth)?)
        } else {
            None
        };
        for &s in &cfg.s {
            let riesz;
            let a: &dyn LinearOperator = match (&user, &oracle) {
                (Some(u), _) => u,
                (None, Some(o)) => {
                    riesz = build_sriesz(o, s)?;
                    &riesz
                }
                (None, None) => unreachable!("an operator source is always set"),
            };
            let b = build_precond(&h, s, cfg.variant, cfg.weight_mode(a), cfg.coarse_space)?;
            let r = condition_study(a, &b, lf, s, cfg.variant, cfg.seed)?;
            passed &= r.pcg_converged;
            let _ = writeln!(csv, "{},ml-diag", r.csv_row());
            if cfg.control {
                let id = ScaledIdentity { n, scale: 1.0 };
                let r = condition_study(a, &id, lf, s, cfg.variant, cfg.seed)?;
                passed &= r.pcg_converged;
                let _ = writeln!(csv, "{},identity", r.csv_row());
            }
        }
    }
    Ok(outcome(csv, passed))
}

/// Largest reconstruction residual accepted by the split command.
pub const SPLIT_RESIDUAL_TOL: f64 = 1e-9;

pub fn run_split(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut csv = format!("{STABILITY_CSV_HEADER}\n");
    let mut passed = true;
    for finest in cfg.finest_levels() {
        let h = cfg.hierarchy(finest)?;
        let oracle = oracle_if_small(&h, cfg)?;
        let norms = oracle.as_ref().map_or(SplitNorms::Surrogate, SplitNorms::Oracle);
        for &s in &cfg.s {
            let rep = split_stability_report(&h, s, cfg.variant, cfg.samples, cfg.seed, norms)?;
            for r in &rep.rows {
                passed &= r.reconstruction_residual < SPLIT_RESIDUAL_TOL;
                let _ = writeln!(csv, "{}", r.csv_row());
            }
            eprintln!(
                "L={} s={s}: max ratio {:.4}, median {:.4}",
                h.finest_level(),
                rep.max_ratio,
                rep.median_ratio
            );
        }
    }
    Ok(outcome(csv, passed))
}

pub fn run_bench(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.s[0];
    let mut samples = Vec::new();
    for finest in cfg.finest_levels() {
        let h = cfg.hierarchy(finest)?;
        samples.push(measure_costs(&h, s, cfg.variant, cfg.seed)?);
    }
    let passed = samples.iter().all(|c| c.within_budget());
    let n: Vec<f64> = samples.iter().map(|c| c.n as f64).collect();
    let slope = |t: Vec<f64>| {
        if samples.len() >= 2 {
            format!("{:.4}", loglog_slope(&n, &t))
        } else {
            String::new()
        }
    };
    let apply_slope = slope(samples.iter().map(|c| c.apply_seconds).collect());
    let norm_slope = slope(samples.iter().map(|c| c.norm_seconds).collect());
    let mut csv = String::from(
        "L,N,total_elements,apply_ops,norm_ops,ops_bound,apply_seconds,norm_seconds,apply_slope,norm_slope\n",
    );
    for c in &samples {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{:e},{:e},{apply_slope},{norm_slope}",
            c.finest_level,
            c.n,
            c.total_elements,
            c.apply_ops,
            c.norm_ops,
            c.ops_bound(),
            c.apply_seconds,
            c.norm_seconds
        );
    }
    Ok(outcome(csv, passed))
}
