//! Epsilon grasp quality: the radius of the largest origin-centered ball
//! inside the convex hull of the wrench set.
//!
//! Computed as the minimum over unit 6D directions of the support function
//! `h(u) = max_i w_i . u`. The solver combines deterministic low-discrepancy
//! direction sampling, temperature-annealed projected subgradient descent,
//! and an active-set polish that solves for the exact facet normal, so flat
//! fixtures (axis-aligned wrench sets) come out at machine precision. Every
//! candidate is scored by a full support evaluation, which can only
//! overestimate the true minimum, never undershoot it.

use nalgebra::{Matrix6, Vector6};

use crate::grasp::wrench::WrenchSet;

const COARSE_DIRECTIONS: usize = 4096;
const DESCENT_STARTS: usize = 8;
const DESCENT_ITERATIONS: usize = 80;
const POLISH_TOLERANCES: [f64; 8] = [3e-1, 1e-1, 3e-2, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8];

pub fn epsilon_quality(set: &WrenchSet) -> f64 {
    epsilon_quality_of(&set.wrenches)
}

pub fn epsilon_quality_of(wrenches: &[Vector6<f64>]) -> f64 {
    if wrenches.is_empty() {
        return 0.0;
    }
    // Canonical order makes the whole computation independent of input
    // permutation, bit for bit.
    let mut ws = wrenches.to_vec();
    ws.sort_by(|a, b| {
        for k in 0..6 {
            match a[k].total_cmp(&b[k]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    let scale = ws.iter().map(|w| w.norm()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return 0.0;
    }

    let support = |u: &Vector6<f64>| -> f64 {
        ws.iter().map(|w| w.dot(u)).fold(f64::NEG_INFINITY, f64::max)
    };

    // Coarse pass over deterministic low-discrepancy directions.
    let mut starts: Vec<(f64, Vector6<f64>)> = Vec::with_capacity(DESCENT_STARTS);
    for k in 0..COARSE_DIRECTIONS {
        let u = quasi_direction(k as u64);
        let h = support(&u);
        if starts.len() < DESCENT_STARTS {
            starts.push((h, u));
            starts.sort_by(|a, b| a.0.total_cmp(&b.0));
        } else if h < starts[DESCENT_STARTS - 1].0 {
            starts[DESCENT_STARTS - 1] = (h, u);
            starts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }

    let mut best_h = starts[0].0;
    let mut best_u = starts[0].1;

    for (_, start) in &starts {
        let (h, u) = descend(&ws, start, scale, support);
        if h < best_h {
            best_h = h;
            best_u = u;
        }
    }

    // Alternate active-set polish and descent; the polish solves for exact
    // facet normals, the descent escapes a wrongly chosen active set.
    for _ in 0..2 {
        for tol_factor in POLISH_TOLERANCES {
            for candidate in facet_candidates(&ws, &best_u, best_h, tol_factor * scale) {
                let h = support(&candidate);
                if h < best_h {
                    best_h = h;
                    best_u = candidate;
                }
            }
        }
        let (h, u) = descend(&ws, &best_u, scale, support);
        if h < best_h {
            best_h = h;
            best_u = u;
        }
    }
    for tol_factor in POLISH_TOLERANCES {
        for candidate in facet_candidates(&ws, &best_u, best_h, tol_factor * scale) {
            let h = support(&candidate);
            if h < best_h {
                best_h = h;
                best_u = candidate;
            }
        }
    }

    // Values below the numerical resolution of a support evaluation mean the
    // origin is not strictly interior.
    if best_h <= scale * 1e-12 {
        0.0
    } else {
        best_h
    }
}

/// Annealed projected subgradient descent on the support function over the
/// unit sphere. The softmax-weighted subgradient is symmetric in the wrench
/// list, so ties cannot introduce order dependence.
fn descend(
    ws: &[Vector6<f64>],
    start: &Vector6<f64>,
    scale: f64,
    support: impl Fn(&Vector6<f64>) -> f64,
) -> (f64, Vector6<f64>) {
    let mut u = *start;
    let mut best_h = support(&u);
    let mut best_u = u;
    for t in 0..DESCENT_ITERATIONS {
        let progress = t as f64 / (DESCENT_ITERATIONS - 1) as f64;
        let temperature = scale * 0.1 * (1e-4_f64).powf(progress);
        let step = 0.3 * (1e-2_f64).powf(progress);

        let h = support(&u);
        let mut weight_sum = 0.0;
        let mut grad = Vector6::zeros();
        for w in ws {
            let s = ((w.dot(&u) - h) / temperature).exp();
            weight_sum += s;
            grad += *w * s;
        }
        grad /= weight_sum;
        let tangent = grad - u * grad.dot(&u);
        let norm = tangent.norm();
        if norm > 1e-16 {
            u = (u - tangent * (step / norm.max(scale * 1e-12)) * (norm / scale))
                .normalize();
        }
        let h_new = support(&u);
        if h_new < best_h {
            best_h = h_new;
            best_u = u;
        }
    }
    (best_h, best_u)
}

/// Solves for the common-support direction of the active wrench set: the
/// null direction of the active wrenches' difference span. On a true facet
/// this is its exact outward normal.
fn facet_candidates(
    ws: &[Vector6<f64>],
    u: &Vector6<f64>,
    h: f64,
    tol: f64,
) -> Vec<Vector6<f64>> {
    let active: Vec<&Vector6<f64>> = ws.iter().filter(|w| w.dot(u) >= h - tol).collect();
    if active.len() < 2 {
        return Vec::new();
    }
    let mean = active.iter().fold(Vector6::zeros(), |a, w| a + **w) / active.len() as f64;
    let mut m = Matrix6::zeros();
    for w in &active {
        let d = **w - mean;
        m += d * d.transpose();
    }
    let eig = m.symmetric_eigen();
    let scale2: f64 = eig.eigenvalues.iter().fold(0.0, |a, v| a + v.abs());
    let cutoff = (scale2 * 1e-12).max(1e-300);

    let mut candidates = Vec::new();
    let null_indices: Vec<usize> = (0..6).filter(|i| eig.eigenvalues[*i] <= cutoff).collect();
    match null_indices.len() {
        0 => {}
        1 => {
            let v = eig.eigenvectors.column(null_indices[0]).into_owned();
            candidates.push(v);
            candidates.push(-v);
        }
        _ => {
            // Flat of dimension > 1: project the current direction onto the
            // null space.
            let mut proj = Vector6::zeros();
            for &i in &null_indices {
                let e = eig.eigenvectors.column(i);
                proj += e.into_owned() * e.dot(u);
            }
            if proj.norm() > 1e-12 {
                candidates.push(proj.normalize());
            }
        }
    }
    candidates
}

/// Deterministic quasi-random unit direction in 6D: an additive Kronecker
/// sequence mapped through Box-Muller pairs.
fn quasi_direction(k: u64) -> Vector6<f64> {
    // Plastic-style constants for d = 6: g solves g^7 = g + 1.
    const G: f64 = 1.103_507_902_905_1;
    let mut u = [0.0f64; 6];
    let mut alpha = 1.0;
    for slot in &mut u {
        alpha /= G;
        *slot = (0.5 + alpha * (k as f64 + 1.0)).fract().clamp(1e-12, 1.0 - 1e-12);
    }
    let mut n = [0.0f64; 6];
    for p in 0..3 {
        let r = (-2.0 * u[2 * p].ln()).sqrt();
        let a = std::f64::consts::TAU * u[2 * p + 1];
        n[2 * p] = r * a.cos();
        n[2 * p + 1] = r * a.sin();
    }
    let v = Vector6::from_row_slice(&n);
    let norm = v.norm();
    if norm > 1e-9 {
        v / norm
    } else {
        Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }
}
