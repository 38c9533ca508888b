use crate::error::{Error, Result};

pub const MI_BINS: usize = 8;

/// Histogram estimate of `I(feature; label)` in nats, with `bins` equal-width
/// bins spanning the observed range. A constant feature carries no
/// information.
pub fn mutual_information(values: &[f64], labels: &[usize], n_classes: usize, bins: usize) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::dim("mutual_information", "samples", values.len(), labels.len()));
    }
    if values.is_empty() || bins == 0 {
        return Err(Error::contract("mutual_information", "need samples and at least one bin"));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Numerical("mutual_information: non-finite feature value".into()));
    }
    if hi == lo {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut joint = vec![0usize; bins * n_classes];
    for (&v, &y) in values.iter().zip(labels) {
        if y >= n_classes {
            return Err(Error::Data(format!("label {y} out of range for {n_classes} classes")));
        }
        let b = (((v - lo) / width) as usize).min(bins - 1);
        joint[b * n_classes + y] += 1;
    }
    let n = values.len() as f64;
    let mut p_bin = vec![0.0; bins];
    let mut p_class = vec![0.0; n_classes];
    for b in 0..bins {
        for y in 0..n_classes {
            let p = joint[b * n_classes + y] as f64 / n;
            p_bin[b] += p;
            p_class[y] += p;
        }
    }
    let mut mi = 0.0;
    for b in 0..bins {
        for y in 0..n_classes {
            let p = joint[b * n_classes + y] as f64 / n;
            if p > 0.0 {
                mi += p * (p / (p_bin[b] * p_class[y])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Feature indices ranked by mutual information with the labels (ties keep
/// the lower index first), truncated to `k`, plus every feature's score.
pub fn select_top_k(
    samples: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    k: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let d = samples
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Data("feature selection on zero samples".into()))?;
    if k == 0 {
        return Err(Error::config("k_select", "must be at least 1"));
    }
    let k = if k > d {
        log::warn!("k_select {k} exceeds the {d} available features; keeping all");
        d
    } else {
        k
    };
    let scores = (0..d)
        .map(|j| {
            let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            mutual_information(&column, labels, n_classes, MI_BINS)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok((order, scores))
}
