//! Power budgets, closed-form scaling factors, and bandwidth pruning.
//!
//! Data power is what remains of the frame budget after side information,
//! split between ROI and non-ROI regions by the preference parameter eta
//! (the ratio of average per-pixel power given to non-ROI over ROI pixels).
//! Per-block scaling factors then follow the inverse-fourth-root laws:
//!
//! * plain variance weighting over one pool,
//! * correlation-weighted variance weighting over one pool,
//! * the correlation-weighted law applied per region with the region's
//!   budget (the ROI-aware allocation).
//!
//! All three satisfy `sum(g^2 * lambda) = budget` over the blocks they
//! allocate. A derivative-free projected search is included as a numerical
//! optimality oracle for the closed forms.

use crate::error::{Error, Result};
use crate::transform::{BLOCK_LEN, LAMBDA_EPSILON};

/// Default preference parameter when a run does not set one.
pub const DEFAULT_ETA: f64 = 0.5;

/// Power budgets for one frame. `gains_*` below consume the budgets; a
/// gain of exactly 0 marks a block as skipped (nothing transmitted,
/// reconstructed as zeros).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPlan {
    pub p_t: f64,
    pub p_s: f64,
    pub p_d: f64,
    pub p_dr: f64,
    pub p_dnr: f64,
    pub eta: f64,
    /// ROI pixel count S(r).
    pub s_r: usize,
    /// Non-ROI pixel count S(nr).
    pub s_nr: usize,
}

impl PowerPlan {
    pub fn new(p_t: f64, p_s: f64, eta: f64, s_r: usize, s_nr: usize) -> Result<Self> {
        let (p_d, p_dr, p_dnr) = split_power(p_t, p_s, eta, s_r, s_nr)?;
        Ok(Self {
            p_t,
            p_s,
            p_d,
            p_dr,
            p_dnr,
            eta,
            s_r,
            s_nr,
        })
    }
}

/// Splits the frame budget into data power and its ROI / non-ROI shares:
/// `p_dr = s_r / (eta * s_nr + s_r) * p_d` and the complement. An empty
/// region forfeits its share to the other one.
pub fn split_power(
    p_t: f64,
    p_s: f64,
    eta: f64,
    s_r: usize,
    s_nr: usize,
) -> Result<(f64, f64, f64)> {
    if p_s < 0.0 {
        return Err(Error::Domain(format!("side-info power {p_s} negative")));
    }
    if p_t <= p_s {
        return Err(Error::Infeasible(format!(
            "total power {p_t} does not cover side-info power {p_s}"
        )));
    }
    // eta = 0 is the all-power-to-ROI limit; non-ROI blocks get skipped.
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta {eta} outside [0, 1]")));
    }
    if s_r + s_nr == 0 {
        return Err(Error::Validation("frame has no pixels to allocate".into()));
    }
    let p_d = p_t - p_s;
    let (p_dr, p_dnr) = if s_r == 0 {
        (0.0, p_d)
    } else if s_nr == 0 {
        (p_d, 0.0)
    } else {
        let denom = eta * s_nr as f64 + s_r as f64;
        (s_r as f64 / denom * p_d, eta * s_nr as f64 / denom * p_d)
    };
    Ok((p_d, p_dr, p_dnr))
}

fn active_indices(lambdas: &[f64]) -> Vec<usize> {
    (0..lambdas.len())
        .filter(|&i| lambdas[i] > LAMBDA_EPSILON)
        .collect()
}

fn check_budget(p: f64) -> Result<()> {
    if p < 0.0 || !p.is_finite() {
        return Err(Error::Domain(format!("power budget {p} invalid")));
    }
    Ok(())
}

/// Variance-weighted scaling: `g_i = lambda_i^(-1/4) * sqrt(p / sum(sqrt(lambda)))`.
///
/// Blocks with negligible power get gain 0 (skipped). An all-skipped input
/// yields an all-zero allocation rather than an error.
pub fn softcast_gains(lambdas: &[f64], p: f64) -> Result<Vec<f64>> {
    check_budget(p)?;
    let active = active_indices(lambdas);
    let mut gains = vec![0.0; lambdas.len()];
    if active.is_empty() {
        return Ok(gains);
    }
    let denom: f64 = active.iter().map(|&i| lambdas[i].sqrt()).sum();
    for &i in &active {
        gains[i] = lambdas[i].powf(-0.25) * (p / denom).sqrt();
    }
    Ok(gains)
}

/// Correlation-weighted scaling:
/// `g_i = lambda_i^(-1/4) * sqrt(p * sqrt(ell_i) / sum(sqrt(lambda) * sqrt(ell)))`.
///
/// The correlation gains are normalized by their maximum before use; the
/// common factor cancels algebraically, and the normalization makes any
/// equal-ell input reduce to exactly the [`softcast_gains`] arithmetic.
pub fn kmvcast_gains(lambdas: &[f64], ells: &[f64], p: f64) -> Result<Vec<f64>> {
    check_budget(p)?;
    if ells.len() != lambdas.len() {
        return Err(Error::Validation(format!(
            "{} lambdas but {} correlation gains",
            lambdas.len(),
            ells.len()
        )));
    }
    let active = active_indices(lambdas);
    let mut gains = vec![0.0; lambdas.len()];
    if active.is_empty() {
        return Ok(gains);
    }
    let ell_max = active.iter().map(|&i| ells[i]).fold(f64::MIN, f64::max);
    let weights: Vec<f64> = active.iter().map(|&i| (ells[i] / ell_max).sqrt()).collect();
    let denom: f64 = active
        .iter()
        .zip(&weights)
        .map(|(&i, &w)| lambdas[i].sqrt() * w)
        .sum();
    for (&i, &w) in active.iter().zip(&weights) {
        gains[i] = lambdas[i].powf(-0.25) * ((p * w) / denom).sqrt();
    }
    Ok(gains)
}

/// Uniform per-block energy baseline: every active block gets `p / n`.
pub fn equal_gains(lambdas: &[f64], p: f64) -> Result<Vec<f64>> {
    check_budget(p)?;
    let active = active_indices(lambdas);
    let mut gains = vec![0.0; lambdas.len()];
    if active.is_empty() {
        return Ok(gains);
    }
    let share = p / active.len() as f64;
    for &i in &active {
        gains[i] = (share / lambdas[i]).sqrt();
    }
    Ok(gains)
}

/// Region budgets actually spent: a region with no allocatable block
/// forfeits its share to the other region.
pub fn region_budgets(plan: &PowerPlan, roi_active: bool, non_roi_active: bool) -> (f64, f64) {
    match (roi_active, non_roi_active) {
        (true, true) => (plan.p_dr, plan.p_dnr),
        (true, false) => (plan.p_dr + plan.p_dnr, 0.0),
        (false, true) => (0.0, plan.p_dr + plan.p_dnr),
        (false, false) => (0.0, 0.0),
    }
}

/// ROI-aware scaling: [`kmvcast_gains`] applied per region with that
/// region's budget.
pub fn roiccast_gains(
    lambdas: &[f64],
    ells: &[f64],
    roi: &[bool],
    plan: &PowerPlan,
) -> Result<Vec<f64>> {
    if roi.len() != lambdas.len() {
        return Err(Error::Validation(format!(
            "{} lambdas but {} roi flags",
            lambdas.len(),
            roi.len()
        )));
    }
    let roi_active = lambdas
        .iter()
        .zip(roi)
        .any(|(&l, &r)| r && l > LAMBDA_EPSILON);
    let non_roi_active = lambdas
        .iter()
        .zip(roi)
        .any(|(&l, &r)| !r && l > LAMBDA_EPSILON);
    let (budget_roi, budget_non_roi) = region_budgets(plan, roi_active, non_roi_active);

    let mut gains = vec![0.0; lambdas.len()];
    for (region_flag, budget) in [(true, budget_roi), (false, budget_non_roi)] {
        let members: Vec<usize> = (0..lambdas.len())
            .filter(|&i| roi[i] == region_flag)
            .collect();
        if members.is_empty() {
            continue;
        }
        let region_lambdas: Vec<f64> = members.iter().map(|&i| lambdas[i]).collect();
        let region_ells: Vec<f64> = members.iter().map(|&i| ells[i]).collect();
        let region_gains = kmvcast_gains(&region_lambdas, &region_ells, budget)?;
        for (&i, &g) in members.iter().zip(&region_gains) {
            gains[i] = g;
        }
    }
    Ok(gains)
}

/// Eq-style distortion objective `sum(ell * m * sigma^2 / g^2)` over blocks
/// with a positive gain.
pub fn distortion_objective(gains: &[f64], ells: &[f64], m: usize, sigma_sq: f64) -> f64 {
    gains
        .iter()
        .zip(ells)
        .filter(|(&g, _)| g > 0.0)
        .map(|(&g, &ell)| ell * m as f64 * sigma_sq / (g * g))
        .sum()
}

/// Derivative-free optimality oracle for the per-pool allocation problem:
/// minimizes `sum(ell * m * sigma^2 / g^2)` under `sum(g^2 * lambda) = p`
/// with a projected multiplicative coordinate search. Intended for small
/// instances (n <= 8); returns the gains found and their objective.
pub fn oracle_gains(
    lambdas: &[f64],
    ells: &[f64],
    p: f64,
    m: usize,
    sigma_sq: f64,
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    check_budget(p)?;
    if lambdas.is_empty() || lambdas.iter().any(|&l| l <= LAMBDA_EPSILON) {
        return Err(Error::Domain(
            "oracle requires a non-empty instance with positive block powers".into(),
        ));
    }
    let n = lambdas.len();

    // Search over per-block energies e_i = g_i^2 * lambda_i.
    let objective = |energies: &[f64]| -> f64 {
        energies
            .iter()
            .zip(ells)
            .zip(lambdas)
            .map(|((&e, &ell), &lambda)| ell * m as f64 * sigma_sq * lambda / e)
            .sum()
    };
    let project = |energies: &mut [f64]| {
        let total: f64 = energies.iter().sum();
        for e in energies.iter_mut() {
            *e *= p / total;
        }
    };

    let mut energies = vec![p / n as f64; n];
    let mut best = objective(&energies);
    let mut scale: f64 = 0.5;
    while scale > resolution {
        for _sweep in 0..4 {
            for i in 0..n {
                for factor in [scale.exp(), (-scale).exp()] {
                    let mut candidate = energies.clone();
                    candidate[i] *= factor;
                    project(&mut candidate);
                    let value = objective(&candidate);
                    if value < best {
                        best = value;
                        energies = candidate;
                    }
                }
            }
        }
        scale *= 0.6;
    }

    let gains: Vec<f64> = energies
        .iter()
        .zip(lambdas)
        .map(|(&e, &lambda)| (e / lambda).sqrt())
        .collect();
    Ok((gains, best))
}

/// Symbols one transmitted block occupies (two coefficients per symbol).
pub const SYMBOLS_PER_BLOCK: usize = BLOCK_LEN / 2;

/// Keeps whole blocks in descending power order (ties toward the lower
/// index) until the data symbol budget runs out. Returns one flag per
/// block; `false` means pruned or powerless, reconstructed as zeros.
pub fn prune_to_bandwidth(
    lambdas: &[f64],
    symbol_budget: usize,
    sideinfo_symbols: usize,
) -> Result<Vec<bool>> {
    if symbol_budget < sideinfo_symbols {
        return Err(Error::Infeasible(format!(
            "symbol budget {symbol_budget} below side-info cost {sideinfo_symbols}"
        )));
    }
    let mut order = active_indices(lambdas);
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));

    let mut available = symbol_budget - sideinfo_symbols;
    let mut kept = vec![false; lambdas.len()];
    for index in order {
        if available < SYMBOLS_PER_BLOCK {
            break;
        }
        kept[index] = true;
        available -= SYMBOLS_PER_BLOCK;
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const REL: f64 = 1e-9;

    fn budget_of(gains: &[f64], lambdas: &[f64]) -> f64 {
        gains.iter().zip(lambdas).map(|(&g, &l)| g * g * l).sum()
    }

    #[test]
    fn split_matches_hand_arithmetic() {
        // p_d = 10, eta = 0.5, per-pixel ratio must be 0.5.
        let (p_d, p_dr, p_dnr) = split_power(10.0, 0.0, 0.5, 100, 300).unwrap();
        assert_eq!(p_d, 10.0);
        assert!((p_dr - 4.0).abs() < 1e-12);
        assert!((p_dnr - 6.0).abs() < 1e-12);
        let ratio = (p_dnr / 300.0) / (p_dr / 100.0);
        assert!((ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn split_symmetric_and_degenerate() {
        let (_, p_dr, p_dnr) = split_power(8.0, 0.0, 1.0, 200, 200).unwrap();
        assert_eq!(p_dr, p_dnr);
        let (p_d, p_dr, p_dnr) = split_power(8.0, 1.0, 0.5, 0, 400).unwrap();
        assert_eq!((p_dr, p_dnr), (0.0, p_d));
        let (p_d, p_dr, p_dnr) = split_power(8.0, 1.0, 0.5, 400, 0).unwrap();
        assert_eq!((p_dr, p_dnr), (p_d, 0.0));
        // eta = 0: everything to ROI.
        let (p_d, p_dr, p_dnr) = split_power(8.0, 1.0, 0.0, 100, 300).unwrap();
        assert_eq!((p_dr, p_dnr), (p_d, 0.0));
    }

    #[test]
    fn split_rejects_infeasible_budget() {
        assert!(matches!(
            split_power(1.0, 2.0, 0.5, 10, 10),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            split_power(1.0, 0.0, 1.5, 10, 10),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn softcast_hand_example() {
        let gains = softcast_gains(&[1.0, 4.0], 3.0).unwrap();
        assert!((gains[0] - 1.0).abs() < 1e-12);
        assert!((gains[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((budget_of(&gains, &[1.0, 4.0]) - 3.0).abs() < REL * 3.0);
    }

    #[test]
    fn softcast_equal_blocks_share_equally() {
        let lambdas = [2.5; 10];
        let gains = softcast_gains(&lambdas, 5.0).unwrap();
        for &g in &gains {
            assert!((g * g * 2.5 - 0.5).abs() < 1e-12);
        }
        let single = softcast_gains(&[1.0], 1.0).unwrap();
        assert!((single[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softcast_all_zero_power_is_empty_allocation() {
        let gains = softcast_gains(&[0.0, 0.0], 3.0).unwrap();
        assert_eq!(gains, vec![0.0, 0.0]);
    }

    #[test]
    fn kmvcast_hand_example() {
        let lambdas = [1.0, 1.0];
        let ells = [1.0, 4.0];
        let gains = kmvcast_gains(&lambdas, &ells, 3.0).unwrap();
        assert!((gains[0] - 1.0).abs() < 1e-12);
        assert!((gains[1] - 2f64.sqrt()).abs() < 1e-12);
        assert!((budget_of(&gains, &lambdas) - 3.0).abs() < REL * 3.0);
    }

    #[test]
    fn kmvcast_equal_ells_is_bitwise_softcast() {
        let lambdas = [0.3, 12.0, 4.5, 0.07, 900.0];
        for ell in [1.0, 63.0, 17.3] {
            let kmv = kmvcast_gains(&lambdas, &[ell; 5], 7.5).unwrap();
            let soft = softcast_gains(&lambdas, 7.5).unwrap();
            assert_eq!(kmv, soft, "ell = {ell}");
        }
    }

    #[test]
    fn roiccast_single_region_is_bitwise_kmvcast() {
        let lambdas = [1.0, 2.0, 3.0, 4.0];
        let ells = [1.0, 5.0, 2.0, 63.0];
        let plan = PowerPlan::new(10.0, 1.0, 0.5, 4 * 64, 0).unwrap();
        let roic = roiccast_gains(&lambdas, &ells, &[true; 4], &plan).unwrap();
        let kmv = kmvcast_gains(&lambdas, &ells, plan.p_d).unwrap();
        assert_eq!(roic, kmv);
    }

    #[test]
    fn roiccast_two_singleton_regions() {
        let plan = PowerPlan {
            p_t: 5.0,
            p_s: 0.0,
            p_d: 5.0,
            p_dr: 4.0,
            p_dnr: 1.0,
            eta: 0.25,
            s_r: 64,
            s_nr: 64,
        };
        let gains = roiccast_gains(&[1.0, 1.0], &[1.0, 1.0], &[true, false], &plan).unwrap();
        assert!((gains[0] - 2.0).abs() < 1e-12);
        assert!((gains[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roiccast_region_budget_identities_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let n = rng.gen_range(2..40);
            let lambdas: Vec<f64> = (0..n)
                .map(|_| 10f64.powf(rng.gen_range(-3.0..3.0)))
                .collect();
            let ells: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..64.0)).collect();
            let roi: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            let s_r = roi.iter().filter(|&&r| r).count() * 64;
            let s_nr = (n - s_r / 64) * 64;
            let p_t = rng.gen_range(0.5..50.0);
            let plan = PowerPlan::new(p_t, 0.0, rng.gen_range(0.05..1.0), s_r, s_nr).unwrap();
            let gains = roiccast_gains(&lambdas, &ells, &roi, &plan).unwrap();

            let roi_active = roi
                .iter()
                .zip(&lambdas)
                .any(|(&r, &l)| r && l > LAMBDA_EPSILON);
            let nr_active = roi
                .iter()
                .zip(&lambdas)
                .any(|(&r, &l)| !r && l > LAMBDA_EPSILON);
            let (b_r, b_nr) = region_budgets(&plan, roi_active, nr_active);
            let spent_r: f64 = (0..n)
                .filter(|&i| roi[i])
                .map(|i| gains[i] * gains[i] * lambdas[i])
                .sum();
            let spent_nr: f64 = (0..n)
                .filter(|&i| !roi[i])
                .map(|i| gains[i] * gains[i] * lambdas[i])
                .sum();
            assert!((spent_r - b_r).abs() <= REL * b_r.max(1e-30));
            assert!((spent_nr - b_nr).abs() <= REL * b_nr.max(1e-30));
        }
    }

    #[test]
    fn equal_gains_spread_energy_uniformly() {
        let lambdas = [1.0, 4.0, 0.25, 0.0];
        let gains = equal_gains(&lambdas, 6.0).unwrap();
        assert_eq!(gains[3], 0.0); // powerless block skipped
        for i in 0..3 {
            assert!((gains[i] * gains[i] * lambdas[i] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn roi_weighted_objective_grows_with_eta() {
        // Shifting power away from the ROI strictly raises its weighted
        // distortion.
        let lambdas = [3.0, 1.0, 8.0, 0.5, 2.0];
        let ells = [1.0, 40.0, 5.0, 63.0, 2.0];
        let roi = [true, true, false, false, false];
        let mut previous = f64::MIN;
        for step in 1..=10 {
            let eta = step as f64 / 10.0;
            let plan = PowerPlan::new(4.0, 0.1, eta, 2 * 64, 3 * 64).unwrap();
            let gains = roiccast_gains(&lambdas, &ells, &roi, &plan).unwrap();
            let roi_objective: f64 = (0..5)
                .filter(|&i| roi[i])
                .map(|i| ells[i] * 64.0 * 1e-3 / (gains[i] * gains[i]))
                .sum();
            assert!(roi_objective > previous, "eta {eta}: {roi_objective}");
            previous = roi_objective;
        }
    }

    #[test]
    fn eta_monotonicity_of_the_split() {
        let mut previous: Option<(f64, f64)> = None;
        for step in 1..=10 {
            let eta = step as f64 / 10.0;
            let (_, p_dr, p_dnr) = split_power(10.0, 0.5, eta, 1000, 3000).unwrap();
            if let Some((prev_r, prev_nr)) = previous {
                assert!(p_dr < prev_r);
                assert!(p_dnr > prev_nr);
            }
            previous = Some((p_dr, p_dnr));
        }
    }

    #[test]
    fn scale_covariance_of_the_closed_forms() {
        let lambdas = [0.4, 2.0, 7.7];
        let ells = [3.0, 1.0, 40.0];
        let base = kmvcast_gains(&lambdas, &ells, 2.0).unwrap();
        let scaled = kmvcast_gains(&lambdas, &ells, 8.0).unwrap();
        for (b, s) in base.iter().zip(&scaled) {
            assert!((s / b - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_agrees_with_closed_form() {
        let lambdas = [1.0, 4.0];
        let ells = [1.0, 1.0];
        let (oracle, oracle_obj) = oracle_gains(&lambdas, &ells, 3.0, 64, 1e-3, 1e-12).unwrap();
        let closed = softcast_gains(&lambdas, 3.0).unwrap();
        for (o, c) in oracle.iter().zip(&closed) {
            assert!((o - c).abs() < 1e-4, "oracle {o} vs closed {c}");
        }
        let closed_obj = distortion_objective(&closed, &ells, 64, 1e-3);
        assert!(oracle_obj >= closed_obj - 1e-6 * closed_obj.abs());
    }

    #[test]
    fn oracle_single_block_is_exact() {
        let (gains, obj) = oracle_gains(&[2.0], &[5.0], 4.0, 64, 1e-3, 1e-12).unwrap();
        assert!((gains[0] - (4.0f64 / 2.0).sqrt()).abs() < 1e-15);
        let expected = 5.0 * 64.0 * 1e-3 / (gains[0] * gains[0]);
        assert!((obj - expected).abs() < 1e-12);
    }

    #[test]
    fn prune_keeps_largest_blocks_with_index_ties() {
        let lambdas = [5.0, 5.0, 1.0];
        // Room for exactly two blocks after side info.
        let kept = prune_to_bandwidth(&lambdas, 64 + 10, 10).unwrap();
        assert_eq!(kept, vec![true, true, false]);
    }

    #[test]
    fn prune_degenerate_budgets() {
        let lambdas = [1.0, 2.0];
        let all = prune_to_bandwidth(&lambdas, 1000, 10).unwrap();
        assert_eq!(all, vec![true, true]);
        let none = prune_to_bandwidth(&lambdas, 10, 10).unwrap();
        assert_eq!(none, vec![false, false]);
        assert!(matches!(
            prune_to_bandwidth(&lambdas, 5, 10),
            Err(Error::Infeasible(_))
        ));
    }
}
