//! Polygons in constraint representation with normals kept in angular order,
//! which turns linear optimisation into a binary search.

use std::cmp::Ordering;
use std::collections::VecDeque;

use super::SetError;

/// Half-plane `normalᵀx ≤ offset` with a unit-length normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    /// Normalises `(a, b)` so that `|a| = 1`.
    pub fn new(a: [f64; 2], b: f64) -> Result<Self, SetError> {
        let len = a[0].hypot(a[1]);
        if !(len > 0.0) || !len.is_finite() || !b.is_finite() {
            return Err(SetError::InvalidParameter(format!(
                "half-plane needs a finite nonzero normal and finite offset, got a = {a:?}, b = {b}"
            )));
        }
        Ok(HalfPlane {
            normal: [a[0] / len, a[1] / len],
            offset: b / len,
        })
    }

    #[inline]
    fn violation(&self, x: [f64; 2]) -> f64 {
        self.normal[0] * x[0] + self.normal[1] * x[1] - self.offset
    }
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// 0 for angles in `(−π, 0]`, 1 for angles in `(0, π]`.
#[inline]
fn half(v: [f64; 2]) -> u8 {
    if v[1] < 0.0 || (v[1] == 0.0 && v[0] > 0.0) {
        0
    } else {
        1
    }
}

/// Counter-clockwise angular order of directions, angles taken in `(−π, π]`.
///
/// Compares half-planes first and then the sign of the cross product, so no
/// trigonometry is involved.
pub fn angular_cmp(a: [f64; 2], b: [f64; 2]) -> Ordering {
    half(a).cmp(&half(b)).then_with(|| {
        let c = cross(a, b);
        if c > 0.0 {
            Ordering::Less
        } else if c < 0.0 {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    })
}

/// Intersection point of the boundary lines of two half-planes.
fn intersect(h1: &HalfPlane, h2: &HalfPlane) -> Option<[f64; 2]> {
    let det = cross(h1.normal, h2.normal);
    if det.abs() < 1e-12 {
        return None;
    }
    Some([
        (h1.offset * h2.normal[1] - h2.offset * h1.normal[1]) / det,
        (h1.normal[0] * h2.offset - h2.normal[0] * h1.offset) / det,
    ])
}

/// Bounded, nonempty convex polygon `{x : aᵢᵀx ≤ bᵢ}` with normals sorted in
/// angular order.
#[derive(Clone, Debug, PartialEq)]
pub struct HPolygon {
    constraints: Vec<HalfPlane>,
}

impl HPolygon {
    /// Builds a polygon from arbitrary constraints: sorts them, drops redundant
    /// ones and rejects empty or unbounded inputs.
    pub fn new(constraints: Vec<HalfPlane>) -> Result<Self, SetError> {
        if constraints.len() < 3 {
            return Err(SetError::Unbounded(format!(
                "polygon needs at least 3 constraints, got {}",
                constraints.len()
            )));
        }
        let mut hs = constraints;
        let scale = hs.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
        let tol = 1e-10 * scale;
        // Bounding box far outside any plausible vertex; if one of its sides
        // survives, the input was unbounded.
        let big = 1e9 * scale;
        let fence = [
            HalfPlane { normal: [1.0, 0.0], offset: big },
            HalfPlane { normal: [0.0, 1.0], offset: big },
            HalfPlane { normal: [-1.0, 0.0], offset: big },
            HalfPlane { normal: [0.0, -1.0], offset: big },
        ];
        hs.extend_from_slice(&fence);
        hs.sort_by(|a, b| {
            angular_cmp(a.normal, b.normal).then(a.offset.total_cmp(&b.offset))
        });
        // Keep the tightest of parallel, same-direction constraints.
        hs.dedup_by(|later, kept| {
            cross(later.normal, kept.normal).abs() < 1e-12
                && later.normal[0] * kept.normal[0] + later.normal[1] * kept.normal[1] > 0.0
        });

        let mut dq: VecDeque<HalfPlane> = VecDeque::with_capacity(hs.len());
        for h in hs {
            while dq.len() >= 2 {
                let p = intersect(&dq[dq.len() - 1], &dq[dq.len() - 2]);
                match p {
                    Some(p) if h.violation(p) > tol => {
                        dq.pop_back();
                    }
                    _ => break,
                }
            }
            while dq.len() >= 2 {
                match intersect(&dq[0], &dq[1]) {
                    Some(p) if h.violation(p) > tol => {
                        dq.pop_front();
                    }
                    _ => break,
                }
            }
            if let Some(back) = dq.back() {
                if cross(h.normal, back.normal).abs() < 1e-12 {
                    // Opposite normals met after popping everything between them.
                    return Err(SetError::EmptyPolygon);
                }
            }
            dq.push_back(h);
        }
        while dq.len() > 2 {
            match intersect(&dq[dq.len() - 1], &dq[dq.len() - 2]) {
                Some(p) if dq[0].violation(p) > tol => {
                    dq.pop_back();
                }
                _ => break,
            }
        }
        while dq.len() > 2 {
            match intersect(&dq[0], &dq[1]) {
                Some(p) if dq[dq.len() - 1].violation(p) > tol => {
                    dq.pop_front();
                }
                _ => break,
            }
        }
        if dq.len() < 3 {
            return Err(SetError::EmptyPolygon);
        }
        if dq.iter().any(|h| fence.contains(h)) {
            return Err(SetError::Unbounded(
                "polygon constraints do not bound the feasible set".into(),
            ));
        }
        let mut constraints: Vec<HalfPlane> = dq.into_iter().collect();
        constraints.sort_by(|a, b| angular_cmp(a.normal, b.normal));
        let poly = HPolygon { constraints };
        // Final sanity check: every vertex must satisfy every constraint.
        for v in poly.vertices()? {
            if poly.constraints.iter().any(|h| h.violation(v) > 1e3 * tol) {
                return Err(SetError::EmptyPolygon);
            }
        }
        Ok(poly)
    }

    /// Builds a polygon from constraints already in angular order that are all
    /// tight support lines of a nonempty convex set.
    pub(crate) fn from_sorted_support_lines(constraints: Vec<HalfPlane>) -> Self {
        debug_assert!(constraints
            .windows(2)
            .all(|w| angular_cmp(w[0].normal, w[1].normal) != Ordering::Greater));
        HPolygon { constraints }
    }

    pub fn constraints(&self) -> &[HalfPlane] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Index pair `(i, i+1)` (cyclic) with `aᵢ ⪯ ℓ ⪯ aᵢ₊₁`, found by binary
    /// search.
    fn bracket(&self, dir: [f64; 2]) -> (usize, usize) {
        let m = self.constraints.len();
        let j = self
            .constraints
            .partition_point(|h| angular_cmp(h.normal, dir) != Ordering::Greater);
        ((j + m - 1) % m, j % m)
    }

    /// A maximiser of `ℓᵀx`: the vertex shared by the two constraints whose
    /// normals bracket `ℓ` in angular order.
    pub fn support_vector(&self, dir: [f64; 2]) -> Result<[f64; 2], SetError> {
        let (i, j) = if dir == [0.0, 0.0] {
            (0, 1 % self.constraints.len())
        } else {
            self.bracket(dir)
        };
        let (hi, hj) = (&self.constraints[i], &self.constraints[j]);
        let det = cross(hi.normal, hj.normal);
        if det.abs() < 1e-12 {
            return Err(SetError::DegeneratePolygon { first: i, second: j });
        }
        Ok([
            (hi.offset * hj.normal[1] - hj.offset * hi.normal[1]) / det,
            (hi.normal[0] * hj.offset - hj.normal[0] * hi.offset) / det,
        ])
    }

    pub fn support_function(&self, dir: [f64; 2]) -> Result<f64, SetError> {
        let v = self.support_vector(dir)?;
        Ok(dir[0] * v[0] + dir[1] * v[1])
    }

    /// Intersections of consecutive constraint lines, in counter-clockwise
    /// order.
    pub fn vertices(&self) -> Result<Vec<[f64; 2]>, SetError> {
        let m = self.constraints.len();
        (0..m)
            .map(|i| {
                let j = (i + 1) % m;
                intersect(&self.constraints[i], &self.constraints[j])
                    .ok_or(SetError::DegeneratePolygon { first: i, second: j })
            })
            .collect()
    }

    pub fn contains(&self, x: [f64; 2], slack: f64) -> bool {
        self.constraints.iter().all(|h| h.violation(x) <= slack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> HPolygon {
        HPolygon::new(vec![
            HalfPlane::new([1.0, 0.0], 1.0).unwrap(),
            HalfPlane::new([0.0, 1.0], 1.0).unwrap(),
            HalfPlane::new([-1.0, 0.0], 1.0).unwrap(),
            HalfPlane::new([0.0, -1.0], 1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn angular_order_is_counter_clockwise_from_minus_pi() {
        let mut dirs = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [-1.0, -1e-9], [1.0, 1.0]];
        dirs.sort_by(|a, b| angular_cmp(*a, *b));
        assert_eq!(dirs, vec![[-1.0, -1e-9], [0.0, -1.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [-1.0, 0.0]]);
    }

    #[test]
    fn square_support_vectors() {
        let sq = square();
        let v = sq.support_vector([1.0, 0.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() == 1.0);
        assert_eq!(sq.support_function([1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(sq.support_vector([1.0, 1.0]).unwrap(), [1.0, 1.0]);
        assert_eq!(sq.support_vector([-3.0, 0.5]).unwrap(), [-1.0, 1.0]);
        assert_eq!(sq.support_vector([-1e-3, -2.0]).unwrap(), [-1.0, -1.0]);
    }

    #[test]
    fn redundant_constraints_are_dropped() {
        let mut cs = square().constraints().to_vec();
        cs.push(HalfPlane::new([1.0, 1.0], 10.0).unwrap());
        cs.push(HalfPlane::new([1.0, 0.0], 5.0).unwrap());
        let p = HPolygon::new(cs).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.support_vector([1.0, 1.0]).unwrap(), [1.0, 1.0]);
    }

    #[test]
    fn empty_and_unbounded_inputs_are_rejected() {
        let empty = HPolygon::new(vec![
            HalfPlane::new([1.0, 0.0], -1.0).unwrap(),
            HalfPlane::new([-1.0, 0.0], -1.0).unwrap(),
            HalfPlane::new([0.0, 1.0], 1.0).unwrap(),
            HalfPlane::new([0.0, -1.0], 1.0).unwrap(),
        ]);
        assert_eq!(empty.unwrap_err(), SetError::EmptyPolygon);
        let open = HPolygon::new(vec![
            HalfPlane::new([1.0, 0.0], 1.0).unwrap(),
            HalfPlane::new([0.0, 1.0], 1.0).unwrap(),
            HalfPlane::new([1.0, 1.0], 1.0).unwrap(),
        ]);
        assert!(matches!(open.unwrap_err(), SetError::Unbounded(_)));
    }

    #[test]
    fn triangle_vertices() {
        let t = HPolygon::new(vec![
            HalfPlane::new([0.0, -1.0], 0.0).unwrap(),
            HalfPlane::new([-1.0, 0.0], 0.0).unwrap(),
            HalfPlane::new([1.0, 1.0], 1.0).unwrap(),
        ])
        .unwrap();
        let mut vs = t.vertices().unwrap();
        vs.iter_mut().for_each(|v| v.iter_mut().for_each(|c| *c = (*c * 1e12).round() / 1e12));
        assert_eq!(vs.len(), 3);
        assert!(vs.contains(&[0.0, 0.0]) && vs.contains(&[1.0, 0.0]) && vs.contains(&[0.0, 1.0]));
    }
}
