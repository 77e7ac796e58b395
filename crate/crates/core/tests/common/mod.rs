//! Test-only oracles, independent of the library's evaluation paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tip_core::kernel::{EventKind, TipParams, Trajectory, TrustEvent};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trajectory mixing direct and indirect events; most sessions carry a report.
pub fn random_trajectory(rng: &mut ChaCha8Rng, max_sessions: u32) -> Trajectory {
    let sessions = rng.gen_range(1..=max_sessions);
    let mut events = vec![TrustEvent::prior(rng.gen_range(0.05..0.95))];
    let mut k = 0;
    for _ in 0..sessions {
        k += rng.gen_range(1..=2);
        let reported = if rng.gen_bool(0.85) {
            Some(rng.gen_range(0.02..0.98))
        } else {
            None
        };
        let event = if rng.gen_bool(0.5) {
            let p: f64 = rng.gen_range(0.0..=1.0);
            let p_bar = if rng.gen_bool(0.7) {
                1.0 - p
            } else {
                rng.gen_range(0.0..1.0)
            };
            TrustEvent::direct(k, p, p_bar, reported)
        } else {
            TrustEvent::indirect(
                k,
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.02..0.98),
                reported,
            )
        };
        events.push(event);
    }
    Trajectory::new("x", "A", events).unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng) -> TipParams {
    TipParams::new(
        rng.gen_range(0.2..8.0),
        rng.gen_range(0.2..8.0),
        rng.gen_range(0.1..5.0),
        rng.gen_range(0.1..5.0),
        rng.gen_range(0.01..6.0),
        rng.gen_range(0.01..6.0),
    )
    .unwrap()
}

/// (α_k, β_k) for every event from the cumulative-sum closed form over the
/// index sets of direct and indirect updates, recomputed from scratch per k.
pub fn closed_form_experience(traj: &Trajectory, theta: &TipParams) -> Vec<(f64, f64)> {
    let events = traj.events();
    (0..events.len())
        .map(|k| {
            let mut alpha = theta.alpha0;
            let mut beta = theta.beta0;
            let direct: Vec<usize> = (0..=k)
                .filter(|&j| matches!(events[j].kind, EventKind::Direct { .. }))
                .collect();
            let indirect: Vec<usize> = (0..=k)
                .filter(|&j| matches!(events[j].kind, EventKind::Indirect { .. }))
                .collect();
            let success: f64 = direct
                .iter()
                .map(|&j| match events[j].kind {
                    EventKind::Direct { success, .. } => success,
                    _ => unreachable!(),
                })
                .sum();
            let failure: f64 = direct
                .iter()
                .map(|&j| match events[j].kind {
                    EventKind::Direct { failure, .. } => failure,
                    _ => unreachable!(),
                })
                .sum();
            alpha += theta.s * success;
            beta += theta.f * failure;
            for &j in &indirect {
                let EventKind::Indirect {
                    trust_in_recommender,
                    recommender_trust,
                } = events[j].kind
                else {
                    unreachable!()
                };
                let previous = (0..j)
                    .rev()
                    .find_map(|i| events[i].reported_trust)
                    .expect("prior rating");
                let pos = (recommender_trust - previous).max(0.0);
                let neg = (previous - recommender_trust).max(0.0);
                alpha += theta.s_hat * trust_in_recommender * pos;
                beta += theta.f_hat * trust_in_recommender * neg;
            }
            (alpha, beta)
        })
        .collect()
}

/// Central finite-difference gradient of `f` at `x` with fixed step `h`.
pub fn central_difference<F: Fn(&[f64; 6]) -> f64>(f: F, x: &[f64; 6], h: f64) -> [f64; 6] {
    std::array::from_fn(|i| {
        let mut up = *x;
        let mut down = *x;
        up[i] += h;
        down[i] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

/// ∫₀^½ g(u) du by tanh-sinh quadrature; `g` may be singular at 0.
pub fn tanh_sinh_half<G: Fn(f64) -> f64>(g: G, h: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    let n_lo = (7.0 / h) as i64;
    let n_hi = (4.0 / h) as i64;
    for j in -n_lo..=n_hi {
        let tau = j as f64 * h;
        let z = half_pi * tau.sinh();
        let u = 0.5 / (1.0 + (-2.0 * z).exp());
        if u <= 0.0 || u >= 0.5 {
            continue;
        }
        let e = (-2.0 * z.abs()).exp();
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        let weight = 0.25 * half_pi * tau.cosh() * sech2;
        total += g(u) * weight;
    }
    total * h
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}
