use super::AnalysisError;

fn check_unit(name: &'static str, value: f64) -> Result<(), AnalysisError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AnalysisError::Domain(format!("{name} = {value} outside [0, 1]")))
    }
}

fn check_params(p: f64, xi: f64, theta: f64) -> Result<(), AnalysisError> {
    check_unit("p", p)?;
    check_unit("xi", xi)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AnalysisError::Domain(format!("theta = {theta} outside (0, 1]")));
    }
    Ok(())
}

/// Probability that `k` disruptions all go unnoticed: `(1 − pξ)^k`.
pub fn disruption_survival(p: f64, xi: f64, k: f64) -> f64 {
    (1.0 - p * xi).powf(k)
}

/// Probability that a disrupter spoiling a θ fraction of the actual-mode
/// systems over `m` rounds stays undetected: `(1 − pξ)^{θm(1−p)}`.
///
/// `m = 0` gives 1.
pub fn detection_bound(p: f64, xi: f64, theta: f64, m: usize) -> Result<f64, AnalysisError> {
    check_params(p, xi, theta)?;
    Ok(disruption_survival(p, xi, theta * m as f64 * (1.0 - p)))
}

/// Smallest `m` with `detection_bound(p, ξ, θ, m) ≤ target`.
pub fn min_rounds(p: f64, xi: f64, theta: f64, target: f64) -> Result<usize, AnalysisError> {
    check_params(p, xi, theta)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(AnalysisError::Domain(format!("target = {target} outside (0, 1)")));
    }
    if p * xi <= 0.0 || p >= 1.0 {
        return Err(AnalysisError::Unbounded);
    }
    let bound = |m: usize| disruption_survival(p, xi, theta * m as f64 * (1.0 - p));
    let estimate = target.ln() / (1.0 - p * xi).ln() / (theta * (1.0 - p));
    let mut m = if estimate.is_finite() { estimate.ceil().max(1.0) as usize } else { 1 };
    // settle rounding at the edge of the closed form
    while bound(m) > target {
        m += 1;
    }
    while m > 1 && bound(m - 1) <= target {
        m -= 1;
    }
    Ok(m)
}
