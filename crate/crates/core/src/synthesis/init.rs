//! Initial coefficients for the tube solver.
//!
//! The center is fitted by least squares to a path from the start to the
//! target center. The path comes from A* over a time-augmented occupancy
//! grid (workspace cells x sampling-plan times); the straight segment is
//! used when the environment has no obstacles or A* finds nothing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{workspace_margin, Vec2};
use crate::tube::bernstein_basis;

use super::problem::SopProblem;

/// Grid cells along the longer workspace axis.
const GRID_CELLS: usize = 64;
/// Cap on the per-layer move radius, in cells.
const MAX_MOVE_CELLS: usize = 4;
/// Jitter standard deviation in units of the mean pinned radius.
const CENTER_JITTER: f64 = 0.5;
const RADIUS_JITTER: f64 = 0.1;

/// A timed polyline the center should follow.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPath {
    pub points: Vec<(f64, Vec2)>,
    /// `true` when the path came from the grid search.
    pub from_search: bool,
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    fn center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new((i as f64 + 0.5) * self.cell, (j as f64 + 0.5) * self.cell)
    }

    fn locate(&self, p: Vec2) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64);
        let j = ((p.y - self.origin.y) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64);
        (i as usize, j as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then prefer larger g (deeper), then lower index.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Path from the pinned start center to the pinned target center.
pub fn initial_path(problem: &SopProblem) -> InitialPath {
    let start = problem.start_ball.center;
    let goal = problem.target_ball.center;
    let t_c = problem.horizon();
    let straight = InitialPath {
        points: vec![(0.0, start), (t_c, goal)],
        from_search: false,
    };
    if problem.env.obstacles.is_empty() {
        return straight;
    }
    match time_expanded_astar(problem) {
        Some(points) => InitialPath {
            points: if problem.env.unsafe_set_speed() == 0.0 {
                retime_by_arc_length(&points, t_c)
            } else {
                points
            },
            from_search: true,
        },
        None => straight,
    }
}

fn time_expanded_astar(problem: &SopProblem) -> Option<Vec<(f64, Vec2)>> {
    let env = &problem.env;
    let times = &problem.plan.sample_times;
    let layers = times.len();
    let bounds = env.workspace.bounds();
    let extent = (bounds.max.x - bounds.min.x).max(bounds.max.y - bounds.min.y);
    let cell = extent / GRID_CELLS as f64;
    let grid = Grid {
        origin: bounds.min,
        cell,
        nx: ((bounds.max.x - bounds.min.x) / cell).ceil().max(1.0) as usize,
        ny: ((bounds.max.y - bounds.min.y) / cell).ceil().max(1.0) as usize,
    };
    let start = problem.start_ball.center;
    let goal = problem.target_ball.center;
    let (si, sj) = grid.locate(start);
    let (gi, gj) = grid.locate(goal);

    let t_c = problem.horizon();
    let needed = (goal - start).norm().max(extent * 0.25);
    let v_max = 3.0 * needed / t_c;
    let max_dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let reach = ((v_max * max_dt / cell).ceil() as usize).clamp(1, MAX_MOVE_CELLS) as isize;

    let static_env = env.unsafe_set_speed() == 0.0;
    let cells = grid.nx * grid.ny;
    let cache_layers = if static_env { 1 } else { layers };
    // 0 unknown, 1 free, 2 blocked
    let mut occupancy = vec![0u8; cells * cache_layers];
    let mut blocked = |i: usize, j: usize, k: usize| -> bool {
        if (i, j) == (si, sj) || (i, j) == (gi, gj) {
            return false;
        }
        let slot = if static_env { 0 } else { k } * cells + j * grid.nx + i;
        if occupancy[slot] == 0 {
            let p = grid.center(i, j);
            let t = times[k];
            let free = env.clearance(p, t) > problem.r_d
                && workspace_margin(p, problem.r_d, env) <= 0.0;
            occupancy[slot] = if free { 1 } else { 2 };
        }
        occupancy[slot] == 2
    };

    let heuristic = |i: usize, j: usize| (grid.center(i, j) - grid.center(gi, gj)).norm();
    let index = |i: usize, j: usize, k: usize| (k * grid.ny + j) * grid.nx + i;
    let total = cells * layers;
    let mut best = vec![f64::INFINITY; total];
    let mut parent = vec![usize::MAX; total];
    let mut heap = BinaryHeap::new();

    let s = index(si, sj, 0);
    best[s] = 0.0;
    heap.push(Node {
        f: heuristic(si, sj),
        g: 0.0,
        index: s,
    });

    let mut found = None;
    while let Some(Node { g, index: id, .. }) = heap.pop() {
        if g > best[id] {
            continue;
        }
        let i = id % grid.nx;
        let j = (id / grid.nx) % grid.ny;
        let k = id / cells;
        if k == layers - 1 {
            if (i, j) == (gi, gj) {
                found = Some(id);
                break;
            }
            continue;
        }
        let remaining = (layers - 1 - k) as isize;
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let ni = i as isize + di;
                let nj = j as isize + dj;
                if ni < 0 || nj < 0 || ni >= grid.nx as isize || nj >= grid.ny as isize {
                    continue;
                }
                let (ni, nj) = (ni as usize, nj as usize);
                // The goal cell must stay reachable in the layers left.
                let cheb = gi.abs_diff(ni).max(gj.abs_diff(nj)) as isize;
                if cheb > reach * (remaining - 1) {
                    continue;
                }
                if blocked(ni, nj, k + 1) {
                    continue;
                }
                let step = (grid.center(ni, nj) - grid.center(i, j)).norm();
                let ng = g + step;
                let nid = index(ni, nj, k + 1);
                if ng < best[nid] {
                    best[nid] = ng;
                    parent[nid] = id;
                    heap.push(Node {
                        f: ng + heuristic(ni, nj),
                        g: ng,
                        index: nid,
                    });
                }
            }
        }
    }

    let mut id = found?;
    let mut rev = Vec::new();
    loop {
        let i = id % grid.nx;
        let j = (id / grid.nx) % grid.ny;
        let k = id / cells;
        rev.push((times[k], grid.center(i, j)));
        if parent[id] == usize::MAX {
            break;
        }
        id = parent[id];
    }
    rev.reverse();
    let last = rev.len() - 1;
    rev[0].1 = start;
    rev[last].1 = goal;
    Some(rev)
}

/// Keeps the geometry of `points` but spreads them uniformly in arc length
/// over `[0, t_c]`, dropping waits.
fn retime_by_arc_length(points: &[(f64, Vec2)], t_c: f64) -> Vec<(f64, Vec2)> {
    let mut geo: Vec<Vec2> = Vec::with_capacity(points.len());
    for &(_, p) in points {
        if geo.last().is_none_or(|&q| (q - p).norm() > 1e-12) {
            geo.push(p);
        }
    }
    if geo.len() < 2 {
        return vec![(0.0, points[0].1), (t_c, points[points.len() - 1].1)];
    }
    let mut arc = vec![0.0];
    for w in geo.windows(2) {
        arc.push(arc[arc.len() - 1] + (w[1] - w[0]).norm());
    }
    let total = arc[arc.len() - 1];
    geo.into_iter()
        .zip(arc)
        .map(|(p, s)| (t_c * s / total, p))
        .collect()
}

/// Samples the timed polyline at `t` by linear interpolation.
fn polyline_at(points: &[(f64, Vec2)], t: f64) -> Vec2 {
    if t <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        if t <= w[1].0 {
            let span = w[1].0 - w[0].0;
            if span <= 0.0 {
                return w[1].1;
            }
            return w[0].1 + (w[1].1 - w[0].1) * ((t - w[0].0) / span);
        }
    }
    points[points.len() - 1].1
}

/// Least-squares Bernstein coefficients through `(t, value)` data with both
/// endpoint coefficients fixed. A light ridge towards the linear
/// interpolant keeps the normal equations well posed.
fn fit_pinned(times: &[f64], values: &[f64], horizon: f64, degree: usize, first: f64, last: f64) -> Vec<f64> {
    let n = degree + 1;
    let linear: Vec<f64> = (0..n)
        .map(|k| first + (last - first) * k as f64 / degree as f64)
        .collect();
    if degree < 2 {
        return linear;
    }
    let free = n - 2;
    let mut a = DMatrix::<f64>::zeros(times.len(), free);
    let mut b = DVector::<f64>::zeros(times.len());
    let mut row = vec![0.0; n];
    for (s, (&t, &v)) in times.iter().zip(values).enumerate() {
        bernstein_basis((t / horizon).clamp(0.0, 1.0), &mut row);
        for k in 0..free {
            a[(s, k)] = row[k + 1];
        }
        b[s] = v - row[0] * first - row[n - 1] * last;
    }
    let ridge = 1e-6 * times.len() as f64;
    let mut normal = a.transpose() * &a;
    let mut rhs = a.transpose() * b;
    for k in 0..free {
        normal[(k, k)] += ridge;
        rhs[k] += ridge * linear[k + 1];
    }
    let solved = normal
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::from_iterator(free, linear[1..n - 1].iter().copied()));
    let mut q = linear;
    q[1..n - 1].copy_from_slice(solved.as_slice());
    q
}

/// Deterministic initial coefficients (no jitter).
pub fn base_coefficients(problem: &SopProblem) -> Vec<f64> {
    let path = initial_path(problem);
    let layout = problem.layout();
    let t_c = problem.horizon();
    // Dense resampling of the path so the fit sees its shape, not just its
    // vertices.
    let m = (4 * layout.center).max(problem.plan.len()).max(64);
    let times: Vec<f64> = (0..m).map(|k| t_c * k as f64 / (m - 1) as f64).collect();
    let pts: Vec<Vec2> = times.iter().map(|&t| polyline_at(&path.points, t)).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let (s, g) = (problem.start_ball, problem.target_ball);
    let deg = problem.basis.degree;
    let c1 = fit_pinned(&times, &xs, t_c, deg, s.center.x, g.center.x);
    let c2 = fit_pinned(&times, &ys, t_c, deg, s.center.y, g.center.y);
    let rd = problem.radius_degree;
    let r: Vec<f64> = (0..=rd)
        .map(|k| (s.radius + (g.radius - s.radius) * k as f64 / rd as f64).max(problem.r_d))
        .collect();
    let mut q = Vec::with_capacity(layout.len());
    q.extend(c1);
    q.extend(c2);
    q.extend(r);
    problem.pin(&mut q);
    q
}

/// Initial coefficients perturbed by seeded Gaussian jitter on the free
/// (interior) coefficients. Endpoint coefficients stay pinned.
pub fn initialize_coefficients(problem: &SopProblem, seed: u64) -> Vec<f64> {
    let mut q = base_coefficients(problem);
    jitter(problem, &mut q, seed);
    q
}

pub(crate) fn jitter(problem: &SopProblem, q: &mut [f64], seed: u64) {
    let layout = problem.layout();
    let scale = 0.5 * (problem.start_ball.radius + problem.target_ball.radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pinned = layout.pinned();
    for (k, qk) in q.iter_mut().enumerate().take(layout.len()) {
        let noise: f64 = StandardNormal.sample(&mut rng);
        if pinned.contains(&k) {
            continue;
        }
        let sigma = if layout.r().contains(&k) {
            RADIUS_JITTER
        } else {
            CENTER_JITTER
        };
        *qk += sigma * scale * noise;
        if layout.r().contains(&k) {
            *qk = qk.max(problem.r_d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball2, Environment, Obstacle, Rect, Shape, Workspace};
    use crate::synthesis::make_sampling_plan;
    use crate::tube::BasisSpec;

    fn open_problem() -> SopProblem {
        let env = Environment::new(
            Workspace::Ball(Ball2::new(Vec2::ZERO, 10.0).unwrap()),
            Ball2::new(Vec2::new(-5.0, 0.0), 0.5).unwrap(),
            Ball2::new(Vec2::new(5.0, 1.0), 0.8).unwrap(),
            vec![],
            10.0,
        )
        .unwrap();
        SopProblem::new(
            env,
            BasisSpec::new(5, 10.0).unwrap(),
            make_sampling_plan(10.0, 0.25).unwrap(),
            0.2,
        )
        .unwrap()
    }

    /// A vertical wall at x in [-0.5, 0.5] with a single gap around y = 3.
    fn wall_problem() -> SopProblem {
        let ws = Rect::new(Vec2::new(-6.0, -6.0), Vec2::new(6.0, 6.0)).unwrap();
        let lower = Rect::new(Vec2::new(-0.5, -6.0), Vec2::new(0.5, 2.0)).unwrap();
        let upper = Rect::new(Vec2::new(-0.5, 4.0), Vec2::new(0.5, 6.0)).unwrap();
        let env = Environment::new(
            Workspace::Rect(ws),
            Ball2::new(Vec2::new(-4.0, -3.0), 0.5).unwrap(),
            Ball2::new(Vec2::new(4.0, -3.0), 0.5).unwrap(),
            vec![
                Obstacle::fixed(Shape::Rect(lower)),
                Obstacle::fixed(Shape::Rect(upper)),
            ],
            10.0,
        )
        .unwrap();
        SopProblem::new(
            env,
            BasisSpec::new(6, 10.0).unwrap(),
            make_sampling_plan(10.0, 0.1).unwrap(),
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn obstacle_free_is_straight_and_linear() {
        let p = open_problem();
        let q = base_coefficients(&p);
        let tube = p.tube_from(&q).unwrap();
        for k in 0..=20 {
            let t = 10.0 * k as f64 / 20.0;
            let s = t / 10.0;
            let expect = Vec2::new(-5.0 + 10.0 * s, s);
            assert!((tube.eval_center(t).unwrap() - expect).norm() < 1e-6);
            assert!((tube.eval_radius(t).unwrap() - (0.5 + 0.3 * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn search_routes_through_the_gap() {
        let p = wall_problem();
        let path = initial_path(&p);
        assert!(path.from_search);
        // Every vertex of the grid path clears the obstacles by r_d.
        for &(t, pt) in &path.points {
            assert!(p.env.clearance(pt, t) > p.r_d || pt == p.start_ball.center || pt == p.target_ball.center);
        }
        // The wall crossing happens inside the gap.
        let crossing = path
            .points
            .windows(2)
            .find(|w| w[0].1.x < 0.0 && w[1].1.x >= 0.0)
            .expect("path crosses the wall");
        assert!(crossing[1].1.y > 2.0 && crossing[1].1.y < 4.0);
    }

    #[test]
    fn seed_changes_interior_but_not_endpoints() {
        let p = open_problem();
        let a = initialize_coefficients(&p, 1);
        let b = initialize_coefficients(&p, 2);
        assert_ne!(a, b);
        for k in p.layout().pinned() {
            assert_eq!(a[k], b[k]);
        }
        assert_eq!(a, initialize_coefficients(&p, 1));
        let tube = p.tube_from(&a).unwrap();
        assert_eq!(tube.eval_center(0.0).unwrap(), p.start_ball.center);
        assert_eq!(tube.eval_radius(10.0).unwrap(), p.target_ball.radius);
    }
}
