use crate::par;
use crate::sets::{LazySet, Norm};

use super::{check_directions, OracleError};

/// Largest tolerated `ρ_Y − ρ_X` deficit before `X ⊆ Y` counts as violated.
pub fn support_gap_tolerance(rho: f64) -> f64 {
    1e-9 * (1.0 + rho.abs())
}

/// Sampled Hausdorff distance `max_ℓ ρ_Y(ℓ) − ρ_X(ℓ)` for `X ⊆ Y` in the
/// `norm`-distance. Directions are rescaled to unit length in the dual norm.
///
/// The result is a lower bound on the true distance.
pub fn hausdorff_estimate(
    x: &LazySet,
    y: &LazySet,
    norm: Norm,
    dirs: &[Vec<f64>],
) -> Result<f64, OracleError> {
    check_directions(dirs, x.dim())?;
    if y.dim() != x.dim() {
        return Err(OracleError::DirectionDimension {
            index: 0,
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let dual = norm.dual();
    let pairs = par::try_map_slice(dirs, |d| -> Result<(f64, f64), OracleError> {
        let len = dual.of(d);
        if len == 0.0 {
            return Ok((0.0, 0.0));
        }
        let d: Vec<f64> = d.iter().map(|v| v / len).collect();
        Ok((x.support_function(&d)?, y.support_function(&d)?))
    })?;
    let (rx, ry): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    hausdorff_from_samples(&rx, &ry)
}

/// Hausdorff estimate from precomputed supports `ρ_X(ℓ)` and `ρ_Y(ℓ)` of
/// `X ⊆ Y` over the same unit directions.
pub fn hausdorff_from_samples(inner: &[f64], outer: &[f64]) -> Result<f64, OracleError> {
    if inner.len() != outer.len() {
        return Err(OracleError::SampleMismatch {
            left: inner.len(),
            right: outer.len(),
        });
    }
    if inner.is_empty() {
        return Err(OracleError::NoDirections);
    }
    let mut best = 0.0f64;
    for (index, (x, y)) in inner.iter().zip(outer).enumerate() {
        let gap = y - x;
        if gap < -support_gap_tolerance(*x) {
            return Err(OracleError::ContainmentViolation { index, gap });
        }
        best = best.max(gap);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{axis_directions, sample_directions};
    use crate::sets::{Ball, Hyperrectangle};

    fn square(r: f64) -> LazySet {
        Hyperrectangle::new(vec![0.0; 2], vec![r; 2]).unwrap().into()
    }

    #[test]
    fn nested_squares_in_max_norm() {
        let d = hausdorff_estimate(&square(1.0), &square(2.0), Norm::Inf, &axis_directions(2)).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let dirs = sample_directions(2, 64, Norm::Two, 0);
        assert_eq!(hausdorff_estimate(&square(1.0), &square(1.0), Norm::Two, &dirs).unwrap(), 0.0);
    }

    #[test]
    fn disc_inside_square() {
        let disc: LazySet = Ball::new(vec![0.0; 2], 1.0, Norm::Two).unwrap().into();
        let dirs = sample_directions(2, 4096, Norm::Two, 0);
        let d = hausdorff_estimate(&disc, &square(1.0), Norm::Two, &dirs).unwrap();
        assert!((d - (2f64.sqrt() - 1.0)).abs() < 1e-3, "{d}");
    }

    #[test]
    fn reversed_containment_is_reported() {
        let err = hausdorff_estimate(&square(2.0), &square(1.0), Norm::Inf, &axis_directions(2)).unwrap_err();
        assert_eq!(err.kind(), "containment");
    }

    #[test]
    fn empty_or_mismatched_inputs() {
        assert_eq!(
            hausdorff_estimate(&square(1.0), &square(1.0), Norm::Inf, &[]).unwrap_err(),
            OracleError::NoDirections
        );
        assert_eq!(
            hausdorff_from_samples(&[1.0], &[1.0, 2.0]).unwrap_err().kind(),
            "sample_mismatch"
        );
    }
}
