use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MetricError, ResultRecord};

/// Resamples with replacement so that, within each treatment, every product
/// appears exactly `ceil(mean per-product count)` times.
///
/// `key` maps a record to its (treatment, product). Every product seen in any
/// treatment must be present in all treatments. Output is grouped by
/// treatment, then product (both in sorted order), and depends only on the
/// input order and `seed`.
pub fn resample_balanced<R, K>(records: &[R], key: K, seed: u64) -> Result<Vec<R>, MetricError>
where
    R: Clone,
    K: Fn(&R) -> (&str, &str),
{
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    let mut products = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        let (t, p) = key(r);
        groups.entry(t).or_default().entry(p).or_default().push(i);
        products.insert(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (treatment, by_product) in &groups {
        if let Some(missing) = products.iter().find(|p| !by_product.contains_key(*p)) {
            return Err(MetricError::MissingProduct {
                treatment: treatment.to_string(),
                product: missing.to_string(),
            });
        }
        let total: usize = by_product.values().map(Vec::len).sum();
        let target = total.div_ceil(by_product.len());
        for idx in by_product.values() {
            for _ in 0..target {
                out.push(records[idx[rng.random_range(0..idx.len())]].clone());
            }
        }
    }
    Ok(out)
}

pub fn resample_records(records: &[ResultRecord], seed: u64) -> Result<Vec<ResultRecord>, MetricError> {
    resample_balanced(records, |r| (r.treatment.as_str(), r.product_id.as_str()), seed)
}
