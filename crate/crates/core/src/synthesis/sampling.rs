use crate::error::{config, Result};

/// Sample times whose `epsilon`-balls cover `[0, t_c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub epsilon: f64,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
}

impl SamplingPlan {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    /// Largest distance from any time in `[0, t_c]` to the nearest sample.
    /// Exact for a sorted plan: the worst point sits at a gap midpoint or at
    /// an end of the horizon.
    pub fn covering_radius(&self) -> f64 {
        let ts = &self.sample_times;
        let gaps = ts.windows(2).map(|w| 0.5 * (w[1] - w[0])).fold(0.0, f64::max);
        gaps.max(ts[0]).max(self.horizon - ts[ts.len() - 1])
    }
}

/// Midpoint covering: `N = ceil(t_c / 2 eps)` samples at `(2s - 1) eps`
/// (clipped to `t_c`) plus both endpoints, sorted and deduplicated.
pub fn make_sampling_plan(t_c: f64, epsilon: f64) -> Result<SamplingPlan> {
    if !(t_c > 0.0 && t_c.is_finite()) {
        return config(format!("horizon must be positive, got {t_c}"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return config(format!("epsilon must be positive, got {epsilon}"));
    }
    let n = (t_c / (2.0 * epsilon)).ceil() as usize;
    let mut times = Vec::with_capacity(n + 2);
    times.push(0.0);
    times.extend((1..=n).map(|s| ((2 * s - 1) as f64 * epsilon).min(t_c)));
    times.push(t_c);
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(SamplingPlan {
        epsilon,
        horizon: t_c,
        sample_times: times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_covering(plan: &SamplingPlan, points: usize) -> f64 {
        (0..points)
            .map(|k| {
                let t = plan.horizon * k as f64 / (points - 1) as f64;
                plan.sample_times
                    .iter()
                    .map(|s| (t - s).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn midpoint_examples() {
        let plan = make_sampling_plan(1.0, 0.25).unwrap();
        assert_eq!(plan.sample_times, vec![0.0, 0.25, 0.75, 1.0]);
        let plan = make_sampling_plan(1.0, 0.6).unwrap();
        assert_eq!(plan.sample_times, vec![0.0, 0.6, 1.0]);
        assert!(dense_covering(&plan, 10_000) <= 0.6);
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        assert!(make_sampling_plan(1.0, 0.0).is_err());
        assert!(make_sampling_plan(1.0, -0.1).is_err());
        assert!(make_sampling_plan(0.0, 0.1).is_err());
    }

    #[test]
    fn covering_radius_matches_dense_grid() {
        for (t_c, eps) in [(10.0, 0.05), (3.0, 0.7), (1.0, 2.0), (7.5, 0.33)] {
            let plan = make_sampling_plan(t_c, eps).unwrap();
            let dense = dense_covering(&plan, 20_001);
            assert!(dense <= eps + 1e-12);
            assert!(plan.covering_radius() <= eps + 1e-12);
            assert!(dense <= plan.covering_radius() + 1e-12);
        }
    }
}
