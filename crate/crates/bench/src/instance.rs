use metadist::dataset::stratified_split;
use metadist::{Dataset, RoleGraph, Signature};

use crate::surrogate::Surrogate;
use crate::variants::{signature_sizes, VariantSpec};
use crate::BenchError;

/// A generated dataset with its split, for one seed.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: VariantSpec,
    /// Replicate number within the benchmark; part of the id.
    pub replicate: usize,
    pub seed: u64,
    pub data: Dataset,
    /// Signature index of every row.
    pub signatures: Vec<usize>,
}

impl Instance {
    pub fn id(&self) -> String {
        format!("{}-{}", self.spec, self.replicate)
    }
}

/// Samples every subproblem uniformly within its restricted sets, scores the
/// points with the surrogate and splits 50/25/25 within each subproblem.
pub fn sample_dataset(g: &RoleGraph, sigs: &[Signature], spec: VariantSpec, seed: u64) -> Result<Instance, BenchError> {
    let sizes = signature_sizes(g, sigs, spec.variant, spec.size)?;
    let surrogate = Surrogate::new(g, spec.variant, spec.arch, seed)?;
    let mut rng = metadist::rng::stream(seed, &format!("sample/{spec}"));
    let mut data = Dataset::default();
    let mut signatures = Vec::new();
    for (s, (sig, &n)) in sigs.iter().zip(&sizes).enumerate() {
        for _ in 0..n {
            let x = g.sample_in_signature(sig, &mut rng).map_err(|e| BenchError::Variant(spec.variant, e.to_string()))?;
            data.targets.push(surrogate.score(&x));
            data.points.push(x);
            signatures.push(s);
        }
    }
    let mut split_rng = metadist::rng::stream(seed, &format!("split/{spec}"));
    data.splits = Some(stratified_split(&signatures, &mut split_rng));
    Ok(Instance { spec, replicate: 0, seed, data, signatures })
}
