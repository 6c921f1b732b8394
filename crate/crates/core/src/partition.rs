//! Uniform box partitions of the state box, lifted to the `w = 1` plane.

use serde::{Deserialize, Serialize};

use crate::symkernel::{IntervalBox, IntervalScalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("expected {expected} division counts, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("division counts must be positive")]
    ZeroDivisions,
    #[error("the origin lies on a cell boundary along axis {0}; use an odd number of divisions")]
    OriginOnBoundary(usize),
    #[error("the origin is not inside the state box")]
    OriginOutside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// 1-based, row-major with the first state as the slowest index.
    pub id: usize,
    pub bx: IntervalBox,
    pub is_origin_region: bool,
}

impl Region {
    /// Vertex `k` takes the upper bound in coordinate `i` iff bit `i` of `k`
    /// is set.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        self.bx.vertices()
    }

    pub fn lifted_vertices(&self) -> Vec<Vec<f64>> {
        self.vertices()
            .into_iter()
            .map(|mut v| {
                v.push(1.0);
                v
            })
            .collect()
    }

    /// The lifted vertex of largest Euclidean norm, lowest index on ties.
    pub fn x_star(&self) -> Vec<f64> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for v in self.lifted_vertices() {
            let nrm: f64 = v.iter().map(|x| x * x).sum();
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, v));
            }
        }
        best.expect("a box has at least one vertex").1
    }

    /// Whether `y ∈ ℝⁿ⁺¹` lies in the cone spanned by the lifted region.
    pub fn cone_contains(&self, y: &[f64]) -> bool {
        let (x, w) = y.split_at(y.len() - 1);
        let w = w[0];
        if w > 0.0 {
            let scaled: Vec<f64> = x.iter().map(|v| v / w).collect();
            self.bx.contains_point(&scaled)
        } else {
            w == 0.0 && x.iter().all(|&v| v == 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    state_box: IntervalBox,
    divisions: Vec<usize>,
    /// Cell edges per axis, `divisions[i] + 1` values each.
    edges: Vec<Vec<f64>>,
    regions: Vec<Region>,
}

pub fn grid_partition(x: &IntervalBox, divisions: &[usize]) -> Result<Partition, PartitionError> {
    let n = x.dim();
    if divisions.len() != n {
        return Err(PartitionError::Arity {
            expected: n,
            found: divisions.len(),
        });
    }
    if divisions.contains(&0) {
        return Err(PartitionError::ZeroDivisions);
    }
    if !x.contains_point(&vec![0.0; n]) {
        return Err(PartitionError::OriginOutside);
    }
    let edges: Vec<Vec<f64>> = x
        .dims()
        .iter()
        .zip(divisions)
        .map(|(d, &k)| {
            (0..=k)
                .map(|j| {
                    if j == k {
                        d.hi()
                    } else {
                        d.lo() + (d.hi() - d.lo()) * j as f64 / k as f64
                    }
                })
                .collect()
        })
        .collect();
    for (axis, e) in edges.iter().enumerate() {
        let tol = 1e-12 * (e[e.len() - 1] - e[0]);
        if e[1..e.len() - 1].iter().any(|v| v.abs() <= tol) {
            return Err(PartitionError::OriginOnBoundary(axis));
        }
    }
    let total: usize = divisions.iter().product();
    let mut regions = Vec::with_capacity(total);
    for lin in 0..total {
        let idx = unflatten(lin, divisions);
        let dims: Vec<IntervalScalar> = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| IntervalScalar::new(edges[a][i], edges[a][i + 1]).unwrap())
            .collect();
        let is_origin = dims.iter().all(|d| d.lo() < 0.0 && d.hi() > 0.0);
        regions.push(Region {
            id: lin + 1,
            bx: IntervalBox::new(dims),
            is_origin_region: is_origin,
        });
    }
    Ok(Partition {
        state_box: x.clone(),
        divisions: divisions.to_vec(),
        edges,
        regions,
    })
}

fn unflatten(mut lin: usize, divisions: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; divisions.len()];
    for a in (0..divisions.len()).rev() {
        idx[a] = lin % divisions[a];
        lin /= divisions[a];
    }
    idx
}

impl Partition {
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn state_box(&self) -> &IntervalBox {
        &self.state_box
    }

    pub fn divisions(&self) -> &[usize] {
        &self.divisions
    }

    pub fn region(&self, id: usize) -> Option<&Region> {
        id.checked_sub(1).and_then(|i| self.regions.get(i))
    }

    pub fn origin_region(&self) -> &Region {
        self.regions
            .iter()
            .find(|r| r.is_origin_region)
            .expect("grid partitions always have an origin region")
    }

    /// Region containing `x`; points on shared faces go to the lowest id.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut lin = 0usize;
        for (a, e) in self.edges.iter().enumerate() {
            let v = x[a];
            if !(v >= e[0] && v <= e[e.len() - 1]) {
                return None;
            }
            let k = (1..e.len()).find(|&j| v <= e[j]).unwrap() - 1;
            lin = lin * self.divisions[a] + k;
        }
        Some(lin + 1)
    }

    /// Regions whose closed boxes intersect `b`.
    pub fn intersecting(&self, b: &IntervalBox) -> Vec<usize> {
        let mut ranges = Vec::with_capacity(self.edges.len());
        for (a, e) in self.edges.iter().enumerate() {
            let d = b.dims()[a];
            let lo = (0..e.len() - 1).find(|&j| e[j + 1] >= d.lo());
            let hi = (0..e.len() - 1).rev().find(|&j| e[j] <= d.hi());
            match (lo, hi) {
                (Some(l), Some(h)) if l <= h => ranges.push((l, h)),
                _ => return Vec::new(),
            }
        }
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let lin = idx
                .iter()
                .zip(&self.divisions)
                .fold(0, |acc, (&i, &d)| acc * d + i);
            out.push(lin + 1);
            let mut a = idx.len();
            loop {
                if a == 0 {
                    out.sort_unstable();
                    return out;
                }
                a -= 1;
                if idx[a] < ranges[a].1 {
                    idx[a] += 1;
                    break;
                }
                idx[a] = ranges[a].0;
            }
        }
    }

    /// Centers and vertices of all cells.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for r in &self.regions {
            pts.push(r.bx.center());
            for v in r.vertices() {
                if !pts.contains(&v) {
                    pts.push(v);
                }
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> IntervalBox {
        IntervalBox::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn seven_by_seven_center_is_twenty_five() {
        let p = grid_partition(&square(), &[7, 7]).unwrap();
        assert_eq!(p.regions().len(), 49);
        assert_eq!(p.origin_region().id, 25);
        assert_eq!(p.regions().iter().filter(|r| r.is_origin_region).count(), 1);
        assert_eq!(p.locate(&[0.8, -0.8]), Some(43));
    }

    #[test]
    fn one_by_one_is_the_box() {
        let p = grid_partition(&square(), &[1, 1]).unwrap();
        assert_eq!(p.regions().len(), 1);
        assert_eq!(p.regions()[0].bx, square());
    }

    #[test]
    fn three_cells_on_a_line() {
        let x = IntervalBox::from_bounds(&[-1.0], &[1.0]).unwrap();
        let p = grid_partition(&x, &[3]).unwrap();
        let b: Vec<(f64, f64)> = p.regions().iter().map(|r| (r.bx.lo()[0], r.bx.hi()[0])).collect();
        assert_eq!(b[0].0, -1.0);
        assert!((b[0].1 + 1.0 / 3.0).abs() < 1e-15);
        assert!((b[1].0 + 1.0 / 3.0).abs() < 1e-15 && (b[1].1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b[2].1, 1.0);
        assert_eq!(p.origin_region().id, 2);
    }

    #[test]
    fn even_divisions_are_rejected() {
        assert_eq!(
            grid_partition(&square(), &[7, 4]).unwrap_err(),
            PartitionError::OriginOnBoundary(1)
        );
    }

    #[test]
    fn max_norm_vertex_and_ties() {
        let r = Region {
            id: 1,
            bx: IntervalBox::from_bounds(&[0.5, 0.5], &[1.0, 1.0]).unwrap(),
            is_origin_region: false,
        };
        assert_eq!(r.x_star(), vec![1.0, 1.0, 1.0]);
        let c = Region {
            id: 2,
            bx: IntervalBox::from_bounds(&[-0.5, -0.5], &[0.5, 0.5]).unwrap(),
            is_origin_region: true,
        };
        assert_eq!(c.x_star(), vec![-0.5, -0.5, 1.0]);
    }

    #[test]
    fn cone_membership() {
        let r = Region {
            id: 1,
            bx: IntervalBox::from_bounds(&[0.5, 0.5], &[1.0, 1.0]).unwrap(),
            is_origin_region: false,
        };
        assert!(r.cone_contains(&[2.0, 2.0, 2.0]));
        assert!(!r.cone_contains(&[0.1, 0.6, 1.0]));
        assert!(!r.cone_contains(&[-0.7, -0.7, -1.0]));
        assert!(r.cone_contains(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn boundary_points_go_to_lowest_id() {
        let p = grid_partition(&square(), &[3, 3]).unwrap();
        let edge = p.regions()[0].bx.hi()[0];
        assert_eq!(p.locate(&[edge, 0.0]), Some(2));
        assert_eq!(p.locate(&[1.5, 0.0]), None);
        let b = IntervalBox::from_bounds(&[-0.2, -0.2], &[0.5, 0.2]).unwrap();
        assert_eq!(p.intersecting(&b), vec![5, 8]);
    }
}
