//! Exact Fisher–Jenks natural breaks.

use super::ScoreError;

/// Class assignment for each input value (1-based, in input order), the
/// break points `[min, upper_1, ..., upper_k]` and the total within-class
/// sum of squared deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct JenksResult {
    pub classes: Vec<usize>,
    pub breaks: Vec<f64>,
    pub objective: f64,
}

/// Partitions `values` into `k` contiguous classes (in sorted order) with
/// minimal within-class sum of squares, by dynamic programming over the
/// distinct values. Equal values always share a class. Among optimal
/// partitions the one with the lexicographically smallest break sequence
/// is returned.
pub fn jenks_classify(values: &[f64], k: usize) -> Result<JenksResult, ScoreError> {
    if k == 0 {
        return Err(ScoreError::ZeroClasses);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(ScoreError::NonFinite(i));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &v in &sorted {
        match distinct.last_mut() {
            Some((x, w)) if *x == v => *w += 1.0,
            _ => distinct.push((v, 1.0)),
        }
    }
    let m = distinct.len();
    if m < k {
        return Err(ScoreError::TooFewDistinctValues { distinct: m, k });
    }

    // Prefix sums of centred values keep the segment SSE well conditioned.
    let centre = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let mut sw = vec![0.0; m + 1];
    let mut sx = vec![0.0; m + 1];
    let mut sxx = vec![0.0; m + 1];
    for (i, &(x, w)) in distinct.iter().enumerate() {
        let c = x - centre;
        sw[i + 1] = sw[i] + w;
        sx[i + 1] = sx[i] + w * c;
        sxx[i + 1] = sxx[i] + w * c * c;
    }
    let sse = |a: usize, b: usize| -> f64 {
        let w = sw[b] - sw[a];
        let s = sx[b] - sx[a];
        (sxx[b] - sxx[a] - s * s / w).max(0.0)
    };

    // cost[c][j]: best SSE for distinct[j..m] split into c classes.
    let mut cost = vec![vec![f64::INFINITY; m + 1]; k + 1];
    for j in 0..m {
        cost[1][j] = sse(j, m);
    }
    for c in 2..=k {
        for j in 0..=m - c {
            let mut best = f64::INFINITY;
            for e in j + 1..=m - c + 1 {
                let v = sse(j, e) + cost[c - 1][e];
                if v < best {
                    best = v;
                }
            }
            cost[c][j] = best;
        }
    }

    // Forward reconstruction: earliest class end that attains the optimum.
    let mut ends = Vec::with_capacity(k);
    let mut j = 0;
    for c in (2..=k).rev() {
        let target = cost[c][j];
        let tol = 1e-12 * target.abs().max(1.0);
        let e = (j + 1..=m - c + 1)
            .find(|&e| sse(j, e) + cost[c - 1][e] <= target + tol)
            .expect("optimum is attained");
        ends.push(e);
        j = e;
    }
    ends.push(m);

    let mut breaks = vec![distinct[0].0];
    breaks.extend(ends.iter().map(|&e| distinct[e - 1].0));
    let classes = values
        .iter()
        .map(|v| {
            let idx = distinct.partition_point(|(x, _)| x < v);
            ends.iter().position(|&e| idx < e).unwrap() + 1
        })
        .collect();
    Ok(JenksResult {
        classes,
        breaks,
        objective: cost[k][0],
    })
}

/// Within-class sum of squared deviations for a given class assignment.
pub fn jenks_objective(values: &[f64], classes: &[usize]) -> f64 {
    let k = classes.iter().copied().max().unwrap_or(0);
    (1..=k)
        .map(|c| {
            let members: Vec<f64> = values
                .iter()
                .zip(classes)
                .filter(|(_, &cl)| cl == c)
                .map(|(v, _)| *v)
                .collect();
            if members.is_empty() {
                return 0.0;
            }
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            members.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        })
        .sum()
}
