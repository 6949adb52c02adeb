use nalgebra::{DMatrix, DVector};

/// Weighted ridge regression `y ~ b0 + X beta`.
///
/// The intercept is never penalized. When the normal equations are not
/// positive definite the penalty is doubled until they are, so a solution is
/// always returned. Returns `(intercept, coefficients)`.
pub(crate) fn weighted_ridge(
    features: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    ridge: f64,
    intercept: bool,
) -> (f64, Vec<f64>) {
    let p = features.first().map_or(0, Vec::len);
    let offset = usize::from(intercept);
    let k = p + offset;
    if k == 0 {
        return (0.0, Vec::new());
    }
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut row = vec![0.0; k];
    for ((z, &y), &w) in features.iter().zip(targets).zip(weights) {
        if intercept {
            row[0] = 1.0;
        }
        row[offset..].copy_from_slice(z);
        for a in 0..k {
            if row[a] == 0.0 {
                continue;
            }
            let wa = w * row[a];
            rhs[a] += wa * y;
            for b in a..k {
                gram[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let mut lambda = ridge;
    for _ in 0..200 {
        let mut g = gram.clone();
        for a in offset..k {
            g[(a, a)] += lambda;
        }
        if let Some(chol) = g.cholesky() {
            let sol = chol.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                let b0 = if intercept { sol[0] } else { 0.0 };
                return (b0, sol.iter().skip(offset).copied().collect());
            }
        }
        lambda = if lambda > 0.0 { lambda * 2.0 } else { 1e-12 };
        if intercept {
            // A zero-weight design can leave the intercept itself singular.
            gram[(0, 0)] += 1e-12;
        }
    }
    (0.0, vec![0.0; p])
}
