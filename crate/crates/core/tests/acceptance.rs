//! Acceptance suite: every criterion the artifact must meet, one test per
//! criterion, each printing a PASS line (run with `--nocapture` to see
//! them). Tolerances are pinned in the asserts.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use roicast::channel;
use roicast::correlation::corr_gain;
use roicast::harness::{self, ExperimentInputs, PipelineParams, Scheme};
use roicast::power_alloc::{
    distortion_objective, kmvcast_gains, oracle_gains, region_budgets, roiccast_gains,
    softcast_gains, PowerPlan,
};
use roicast::receiver;
use roicast::roi_coding::{rlc_decode, rlc_encode, RoiMask};
use roicast::sideinfo::{self, McsTable};
use roicast::synth::{self, SynthConfig};
use roicast::transform;

const BUDGET_REL: f64 = 1e-9;

fn fixture_inputs(frames: usize) -> ExperimentInputs {
    let config = SynthConfig {
        frames,
        ..SynthConfig::default()
    };
    let (sequence, rois) = synth::sequence(&config).unwrap();
    ExperimentInputs {
        reference: sequence[0].clone(),
        frames: sequence.into_iter().enumerate().collect(),
        rois,
    }
}

fn spent(gains: &[f64], lambdas: &[f64], select: impl Fn(usize) -> bool) -> f64 {
    gains
        .iter()
        .zip(lambdas)
        .enumerate()
        .filter(|(i, _)| select(*i))
        .map(|(_, (&g, &l))| g * g * l)
        .sum()
}

fn assert_rel(actual: f64, expected: f64, rel: f64, what: &str) {
    let tolerance = rel * expected.abs().max(1e-30);
    assert!(
        (actual - expected).abs() <= tolerance,
        "{what}: {actual} vs {expected} (tolerance {tolerance})"
    );
}

#[test]
fn criterion_01_budget_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=396);
        let lambdas: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-3.0..=3.0)))
            .collect();
        let ells: Vec<f64> = (0..n)
            .map(|_| corr_gain(rng.gen_range(0.0..=1.0), 64).unwrap())
            .collect();
        let roi: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.35)).collect();
        let p = rng.gen_range(0.1..100.0);
        let eta = rng.gen_range(0.05..=1.0);

        let soft = softcast_gains(&lambdas, p).unwrap();
        assert_rel(
            spent(&soft, &lambdas, |_| true),
            p,
            BUDGET_REL,
            "softcast budget",
        );

        let kmv = kmvcast_gains(&lambdas, &ells, p).unwrap();
        assert_rel(
            spent(&kmv, &lambdas, |_| true),
            p,
            BUDGET_REL,
            "kmvcast budget",
        );

        let n_roi = roi.iter().filter(|&&r| r).count();
        let plan = PowerPlan::new(p, 0.0, eta, 64 * n_roi, 64 * (n - n_roi)).unwrap();
        let roic = roiccast_gains(&lambdas, &ells, &roi, &plan).unwrap();
        let (b_roi, b_non_roi) = region_budgets(&plan, n_roi > 0, n_roi < n);
        assert_rel(
            spent(&roic, &lambdas, |i| roi[i]),
            b_roi,
            BUDGET_REL,
            "roi region budget",
        );
        assert_rel(
            spent(&roic, &lambdas, |i| !roi[i]),
            b_non_roi,
            BUDGET_REL,
            "non-roi region budget",
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE  1: PASS - budget identities hold to {BUDGET_REL:.0e} relative on 1000 \
         instances in {elapsed:?}"
    );
}

#[test]
fn criterion_02_kkt_optimality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let m = 64;
    let sigma_sq = 1e-3;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let lambdas: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-3.0..=3.0)))
            .collect();
        let ells: Vec<f64> = (0..n)
            .map(|_| corr_gain(rng.gen_range(0.0..=1.0), 64).unwrap())
            .collect();
        let p = rng.gen_range(0.5..20.0);

        let closed = kmvcast_gains(&lambdas, &ells, p).unwrap();
        let closed_obj = distortion_objective(&closed, &ells, m, sigma_sq);
        let (_, oracle_obj) = oracle_gains(&lambdas, &ells, p, m, sigma_sq, 1e-12).unwrap();
        assert!(
            closed_obj <= oracle_obj + 1e-6 * closed_obj.abs(),
            "closed form {closed_obj} worse than oracle {oracle_obj}"
        );

        // Budget-preserving perturbations of the closed-form energies must
        // never improve the objective.
        let energies: Vec<f64> = closed
            .iter()
            .zip(&lambdas)
            .map(|(&g, &l)| g * g * l)
            .collect();
        for _ in 0..200 {
            let mut perturbed: Vec<f64> = energies
                .iter()
                .map(|&e| e * (0.1 * rng.gen_range(-1.0..1.0f64)).exp())
                .collect();
            let total: f64 = perturbed.iter().sum();
            for e in &mut perturbed {
                *e *= p / total;
            }
            let gains: Vec<f64> = perturbed
                .iter()
                .zip(&lambdas)
                .map(|(&e, &l)| (e / l).sqrt())
                .collect();
            let objective = distortion_objective(&gains, &ells, m, sigma_sq);
            assert!(
                objective >= closed_obj * (1.0 - 1e-9),
                "perturbation beat the closed form: {objective} < {closed_obj}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE  2: PASS - closed form matches the search oracle within 1e-6 and survives \
         40000 perturbations in {elapsed:?}"
    );
}

#[test]
fn criterion_03_reduction_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..50 {
        let n = rng.gen_range(1..=64);
        let lambdas: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-3.0..=3.0)))
            .collect();
        let p = rng.gen_range(0.5..20.0);

        // Equal correlation gains collapse the weighted law onto the plain
        // one, bit for bit, whatever the common value is.
        for ell in [1.0, 63.0, rng.gen_range(1.0..64.0)] {
            let kmv = kmvcast_gains(&lambdas, &vec![ell; n], p).unwrap();
            let soft = softcast_gains(&lambdas, p).unwrap();
            assert_eq!(kmv, soft, "equal-ell reduction failed for ell = {ell}");
        }

        // A single-region frame collapses the ROI-aware law onto the
        // correlation-weighted one.
        let ells: Vec<f64> = (0..n)
            .map(|_| corr_gain(rng.gen_range(0.0..=1.0), 64).unwrap())
            .collect();
        let plan = PowerPlan::new(p, 0.0, rng.gen_range(0.05..=1.0), 64 * n, 0).unwrap();
        let roic = roiccast_gains(&lambdas, &ells, &vec![true; n], &plan).unwrap();
        let kmv = kmvcast_gains(&lambdas, &ells, plan.p_d).unwrap();
        assert_eq!(roic, kmv, "single-region reduction failed");
    }
    println!("ACCEPTANCE  3: PASS - reduction chain is bit-identical on 50 random instances");
}

#[test]
fn criterion_04_distortion_law_monte_carlo() {
    let start = Instant::now();
    let sigma_eff_sq: f64 = 5e-4;
    let gain = 1.0;
    let trials = 100_000;
    let normal = Normal::new(0.0, sigma_eff_sq.sqrt()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut error = 0.0;
        for _ in 0..64 {
            let n: f64 = normal.sample(&mut rng);
            error += (n / gain) * (n / gain);
        }
        samples.push(error);
    }
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1.0);
    let estimator_sigma = (var / count).sqrt();
    let analytic = receiver::expected_distortion(gain, sigma_eff_sq, 64).unwrap();
    assert!((analytic - 0.032).abs() < 1e-15);
    assert!(
        (mean - analytic).abs() <= 3.0 * estimator_sigma,
        "monte carlo {mean} vs analytic {analytic} (3 sigma = {})",
        3.0 * estimator_sigma
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE  4: PASS - expected distortion 0.032 confirmed by {trials} trials \
         (empirical {mean:.6}) in {elapsed:?}"
    );
}

#[test]
fn criterion_05_correlation_gain_envelope() {
    let points = 10_000;
    let mut best_k = 0.0;
    let mut best = f64::MIN;
    for i in 0..=points {
        let k = i as f64 / points as f64;
        let ell = corr_gain(k, 64).unwrap();
        assert!(
            (1.0..=64.0 + 1e-9).contains(&ell),
            "ell({k}) = {ell} escapes [1, 64]"
        );
        if ell > best {
            best = ell;
            best_k = k;
        }
    }
    let grid = 1.0 / points as f64;
    assert!(
        (best_k - 0.125).abs() <= grid,
        "maximum at {best_k}, expected 0.125 +- {grid}"
    );
    println!(
        "ACCEPTANCE  5: PASS - correlation gain spans [1, 64] with its maximum at k = {best_k}"
    );
}

#[test]
fn criterion_06_round_trip_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);

    // DCT / IDCT.
    for _ in 0..1000 {
        let mut block = [0.0; 64];
        for v in &mut block {
            *v = rng.gen_range(-255.0..255.0);
        }
        let back = transform::dct2_inverse(&transform::dct2_forward(&block));
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9, "dct round trip off by {}", a - b);
        }
    }

    // Hadamard whiten / dewhiten.
    for _ in 0..1000 {
        let len = rng.gen_range(1..1000);
        let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let (white, pad) = channel::whiten(&values);
        let back = channel::dewhiten(&white, pad).unwrap();
        assert_eq!(back.len(), values.len());
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "whiten round trip off by {}", a - b);
        }
    }

    // I/Q pack / unpack, bit exact.
    for _ in 0..1000 {
        let len = rng.gen_range(1..500);
        let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let (symbols, pad) = channel::iq_pack(&values);
        assert_eq!(channel::iq_unpack(&symbols, pad), values);
    }

    // OFDM frame / deframe.
    for _ in 0..1000 {
        let len = rng.gen_range(0..300);
        let symbols: Vec<num_complex::Complex64> = (0..len)
            .map(|_| {
                num_complex::Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
            })
            .collect();
        let (time, n) = channel::ofdm_frame(&symbols);
        let back = channel::ofdm_deframe(&time, n).unwrap();
        assert_eq!(back.len(), symbols.len());
        for (a, b) in symbols.iter().zip(&back) {
            assert!(
                (a - b).norm() < 1e-12,
                "ofdm round trip off by {}",
                (a - b).norm()
            );
        }
    }

    // Run-length coding, exact.
    for _ in 0..1000 {
        let len = rng.gen_range(1..600);
        let mask = RoiMask::new((0..len).map(|_| rng.gen_bool(0.3)).collect());
        let decoded = rlc_decode(&rlc_encode(&mask), mask.len()).unwrap();
        assert_eq!(mask, decoded);
    }

    // Huffman, exact.
    for _ in 0..1000 {
        let len = rng.gen_range(1..500);
        let symbols: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let (bits, _, table) = sideinfo::huffman::huffman_encode(&symbols).unwrap();
        assert_eq!(
            sideinfo::huffman::huffman_decode(&bits, &table, symbols.len()).unwrap(),
            symbols
        );
    }

    // Side-info packet build / parse, exact.
    let mcs_table = McsTable::default();
    for _ in 0..1000 {
        let n = rng.gen_range(1..450);
        let mask = RoiMask::new((0..n).map(|_| rng.gen_bool(0.25)).collect());
        let spans = rlc_encode(&mask);
        let lambda_codes: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
        let k_codes: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
        let mcs = mcs_table.select(rng.gen_range(-10.0..30.0));
        let packet = sideinfo::build_packet(&spans, &lambda_codes, &k_codes, mcs, 1e-3).unwrap();
        let parsed = sideinfo::parse_packet(&packet.bytes).unwrap();
        assert_eq!(parsed.n_blocks, n);
        assert_eq!(parsed.spans, spans);
        assert_eq!(parsed.lambda_codes, lambda_codes);
        assert_eq!(parsed.k_codes, k_codes);
    }

    println!(
        "ACCEPTANCE  6: PASS - 1000-case round trips: dct (<1e-9), whiten (<1e-12), i/q (exact), \
         ofdm (<1e-12), rlc (exact), huffman (exact), packet (exact)"
    );
}

#[test]
fn criterion_07_eta_trend() {
    let inputs = fixture_inputs(3);
    let params = PipelineParams {
        analytic: true,
        ..PipelineParams::default()
    };
    let etas: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let rows = harness::run_eta_sweep(&inputs, &params, 2, &etas).unwrap();
    for pair in rows.windows(2) {
        assert!(
            pair[1].psnr_overall > pair[0].psnr_overall,
            "overall PSNR not strictly increasing: {} -> {}",
            pair[0].psnr_overall,
            pair[1].psnr_overall
        );
        assert!(
            pair[1].psnr_roi.unwrap() < pair[0].psnr_roi.unwrap(),
            "ROI PSNR not strictly decreasing: {} -> {}",
            pair[0].psnr_roi.unwrap(),
            pair[1].psnr_roi.unwrap()
        );
    }
    println!(
        "ACCEPTANCE  7: PASS - eta sweep 0.1..1.0: overall PSNR {:.2} -> {:.2} dB rising, ROI \
         PSNR {:.2} -> {:.2} dB falling",
        rows[0].psnr_overall,
        rows[9].psnr_overall,
        rows[0].psnr_roi.unwrap(),
        rows[9].psnr_roi.unwrap()
    );
}

#[test]
fn criterion_08_roi_gain_direction() {
    let inputs = fixture_inputs(3);
    let frame_number = 2;
    let frame = inputs.frame(frame_number).unwrap();

    // The fixture's ROI must stay a minority share of the frame.
    let analysis = harness::analyze_source(
        frame,
        &inputs.reference,
        inputs.rects(frame_number),
        8,
        frame_number,
    )
    .unwrap();
    let roi_share =
        analysis.mask.s_roi() as f64 / (analysis.mask.s_roi() + analysis.mask.s_non_roi()) as f64;
    assert!(roi_share <= 0.30, "fixture ROI share {roi_share}");

    let seeds: Vec<u64> = (0..20).collect();
    for snr_db in [-5.0, 0.0, 5.0, 10.0] {
        let mut diff_sum = 0.0;
        for &seed in &seeds {
            let mut roic_psnr = 0.0;
            let mut soft_psnr = 0.0;
            for scheme in [Scheme::Roiccast, Scheme::Softcast] {
                let params = PipelineParams {
                    scheme,
                    eta: 0.25,
                    channel_snr_db: snr_db,
                    seed,
                    ..PipelineParams::default()
                };
                let result = harness::run_frame_with_analysis(&analysis, frame, &params).unwrap();
                let roi = result.quality.as_ref().unwrap().psnr_roi.unwrap();
                match scheme {
                    Scheme::Roiccast => roic_psnr = roi,
                    Scheme::Softcast => soft_psnr = roi,
                    _ => unreachable!(),
                }
            }
            diff_sum += roic_psnr - soft_psnr;
        }
        let mean_gain = diff_sum / seeds.len() as f64;
        assert!(
            mean_gain >= 3.0,
            "ROI gain at {snr_db} dB is only {mean_gain:.2} dB"
        );
        println!(
            "ACCEPTANCE  8: PASS - ROI PSNR gain over plain variance weighting at {snr_db:>4} dB: \
             {mean_gain:.2} dB (20 seeds)"
        );
    }
}

#[test]
fn criterion_09_mcs_table_conformance() {
    let table = McsTable::default();
    let expected = [
        (-5.0, 1, 2, 0.0762),
        (0.0, 4, 2, 0.3008),
        (5.0, 7, 4, 0.3691),
        (10.0, 9, 4, 0.6016),
        (15.0, 12, 6, 0.6504),
        (20.0, 15, 6, 0.9258),
    ];
    for &(beta_db, cqi, order, ecr) in &expected {
        let entry = table.select(beta_db);
        assert_eq!(
            (entry.beta_db, entry.cqi, entry.modulation_order, entry.ecr),
            (beta_db, cqi, order, ecr)
        );
    }
    // Floor rule at intermediate and out-of-range SNRs.
    assert_eq!(table.select(7.0).cqi, 7);
    assert_eq!(table.select(12.3).cqi, 9);
    assert_eq!(table.select(3.0).cqi, 4);
    assert_eq!(table.select(-2.0).cqi, 1);
    assert_eq!(table.select(-20.0).cqi, 1);
    assert_eq!(table.select(40.0).cqi, 15);
    println!("ACCEPTANCE  9: PASS - all six MCS rows and the floor rule reproduce exactly");
}

#[test]
fn criterion_10_determinism_and_performance() {
    let inputs = fixture_inputs(3);
    let params = PipelineParams::default();

    let start = Instant::now();
    let first = harness::run_frame(&inputs, &params, 2).unwrap();
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "single-frame pipeline took {elapsed:?}"
    );

    let second = harness::run_frame(&inputs, &params, 2).unwrap();
    assert_eq!(first.tx_gains, second.tx_gains);
    assert_eq!(first.rx_gains, second.rx_gains);
    assert_eq!(
        first.reconstructed.as_ref().unwrap().pixels(),
        second.reconstructed.as_ref().unwrap().pixels()
    );
    assert_eq!(first.snr_trace, second.snr_trace);
    assert_eq!(
        first.quality.as_ref().unwrap(),
        second.quality.as_ref().unwrap()
    );
    println!(
        "ACCEPTANCE 10: PASS - seeded single-frame run is byte-identical and completed in \
         {elapsed:?}"
    );
}
