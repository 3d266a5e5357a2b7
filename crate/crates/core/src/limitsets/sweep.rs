use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{classify_omega, ClassifyOptions, OmegaClassification};
use crate::dynsys::{BoxDomain, VectorField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SweepCounts {
    pub closed_orbit: usize,
    pub equilibrium: usize,
    pub unresolved: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub index: usize,
    pub initial: Vec<f64>,
    pub outcome: OmegaClassification,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub n: usize,
    pub seed: u64,
    pub counts: SweepCounts,
    /// First entry of each observed class, in class order.
    pub exemplars: Vec<SweepEntry>,
    /// Every unresolved entry, with its diagnostics.
    pub unresolved: Vec<SweepEntry>,
    #[serde(skip)]
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn closed_orbit_fraction(&self) -> f64 {
        self.counts.closed_orbit as f64 / self.n as f64
    }
}

/// Classify `n` initial conditions: the `forced` points first, then uniform
/// seeded draws from `domain`. Each point is classified independently and
/// results are collected in index order.
pub fn genericity_sweep<F: VectorField + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    n: usize,
    seed: u64,
    forced: &[Vec<f64>],
    opts: &ClassifyOptions,
) -> Result<SweepReport> {
    if n == 0 {
        return Err(Error::Invalid("sweep needs at least one sample".into()));
    }
    if domain.dim() != field.dim() || domain.is_empty() {
        return Err(Error::Invalid("sweep box must be nonempty and match the field".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ics: Vec<Vec<f64>> = (0..n)
        .map(|i| forced.get(i).cloned().unwrap_or_else(|| domain.sample(&mut rng)))
        .collect();
    let entries: Vec<SweepEntry> = ics
        .into_par_iter()
        .enumerate()
        .map(|(index, initial)| SweepEntry {
            outcome: classify_omega(field, &initial, opts),
            index,
            initial,
        })
        .collect();
    let mut counts = SweepCounts::default();
    for e in &entries {
        match e.outcome {
            OmegaClassification::ClosedOrbit { .. } => counts.closed_orbit += 1,
            OmegaClassification::Equilibrium(_) => counts.equilibrium += 1,
            OmegaClassification::Unresolved { .. } => counts.unresolved += 1,
        }
    }
    let mut exemplars = Vec::new();
    for kind in ["ClosedOrbit", "Equilibrium", "Unresolved"] {
        if let Some(e) = entries.iter().find(|e| e.outcome.kind() == kind) {
            exemplars.push(e.clone());
        }
    }
    let unresolved = entries
        .iter()
        .filter(|e| e.outcome.kind() == "Unresolved")
        .cloned()
        .collect();
    Ok(SweepReport {
        n,
        seed,
        counts,
        exemplars,
        unresolved,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::get_builtin;

    #[test]
    fn forced_origin_is_an_equilibrium() {
        let f = get_builtin("paper-3d-limit").unwrap().system.bind_defaults().unwrap();
        let r = genericity_sweep(
            &f,
            &BoxDomain::symmetric(&[4.0; 3]),
            1,
            0,
            &[vec![0.0; 3]],
            &ClassifyOptions::default(),
        )
        .unwrap();
        assert_eq!(r.counts.equilibrium, 1);
        assert_eq!(r.counts.closed_orbit + r.counts.unresolved, 0);
    }

    #[test]
    fn zero_samples_rejected() {
        let f = get_builtin("paper-3d-limit").unwrap().system.bind_defaults().unwrap();
        let b = BoxDomain::symmetric(&[4.0; 3]);
        assert!(genericity_sweep(&f, &b, 0, 0, &[], &ClassifyOptions::default()).is_err());
    }
}
