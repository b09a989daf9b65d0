//! Finite-difference verification of analytic gradients.
//!
//! Runs in 64-bit mode with dropout disabled (callers must build the
//! computation with masks of ones). The computation is rebuilt from
//! scratch for every probe, so the closure must be deterministic.

use crate::error::Result;
use crate::params::ParameterStore;
use crate::rng::{Purpose, Stream};
use crate::tape::{NodeId, Tape};

/// Builds the loss on a fresh tape from the current parameter values.
pub type BuildFn<'a> = dyn Fn(&ParameterStore<f64>, &mut Tape<f64>) -> Result<NodeId> + 'a;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Pass iff max relative error <= tolerance.
    pub tolerance: f64,
    /// Check all coordinates when the store has at most this many;
    /// otherwise a deterministic subsample of this size.
    pub max_coords: usize,
    /// Seed for the subsampling stream.
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 200,
            seed: 0,
        }
    }
}

/// Worst coordinate seen by a check.
#[derive(Clone, Debug)]
pub struct WorstCoord {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub worst: Option<WorstCoord>,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "checked {} coords, max relative error {:.3e} (tolerance {:.0e}): {}",
            self.checked,
            self.max_rel_err,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                " [worst {}[{}] analytic {:.6e} numeric {:.6e}]",
                w.name, w.index, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    // Floor keeps finite-difference noise on vanishing coordinates from
    // dominating the report.
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares analytic gradients against central differences for every
/// parameter coordinate (or a deterministic subsample for large
/// stores). A computation that touches no parameters passes vacuously
/// with an empty report.
pub fn grad_check(
    params: &ParameterStore<f64>,
    build: &BuildFn,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    // Analytic pass.
    let mut work = params.snapshot();
    let mut tape = Tape::new();
    let loss = build(&work, &mut tape)?;
    tape.backward(loss)?;
    tape.accumulate_param_grads(&mut work)?;

    // Coordinate list: (name, flat index).
    let mut coords: Vec<(String, usize)> = Vec::new();
    for (name, value, _) in work.iter() {
        for i in 0..value.numel() {
            coords.push((name.to_string(), i));
        }
    }
    if coords.len() > cfg.max_coords {
        let mut rng = Stream::with_tags(cfg.seed, Purpose::Init, &[0x47524144]); // "GRAD"
        // Partial Fisher-Yates: the first max_coords entries become a
        // uniform sample without replacement.
        for i in 0..cfg.max_coords {
            let j = i + rng.below(coords.len() - i);
            coords.swap(i, j);
        }
        coords.truncate(cfg.max_coords);
    }

    let mut max_err = 0.0f64;
    let mut worst = None;
    for (name, i) in &coords {
        let analytic = work.grad(name)?.data()[*i];
        let orig = work.get(name)?.data()[*i];

        work.get_mut(name)?.data_mut()[*i] = orig + cfg.step;
        let mut t_plus = Tape::new();
        let l_plus = build(&work, &mut t_plus)?;
        let f_plus = t_plus.value(l_plus).item()?;

        work.get_mut(name)?.data_mut()[*i] = orig - cfg.step;
        let mut t_minus = Tape::new();
        let l_minus = build(&work, &mut t_minus)?;
        let f_minus = t_minus.value(l_minus).item()?;

        work.get_mut(name)?.data_mut()[*i] = orig;

        let numeric = (f_plus - f_minus) / (2.0 * cfg.step);
        let err = rel_err(analytic, numeric);
        if err > max_err {
            max_err = err;
            worst = Some(WorstCoord {
                name: name.clone(),
                index: *i,
                analytic,
                numeric,
            });
        }
    }

    Ok(GradCheckReport {
        checked: coords.len(),
        max_rel_err: max_err,
        tolerance: cfg.tolerance,
        worst,
        pass: max_err <= cfg.tolerance,
    })
}
