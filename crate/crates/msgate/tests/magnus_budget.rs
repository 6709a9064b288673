//! Magnus error budget: brute-force maxima, scaling laws and the sweep.

use std::f64::consts::{FRAC_PI_4, PI};

use msgate::chain::{seven_ion_chain, ChainSpec, GatePair};
use msgate::fidelity::{anticommuting_infidelity, pauli2};
use msgate::functionals::{eval_f, eval_q, eval_sp, eval_z};
use msgate::magnus::*;
use msgate::pulse::{synthesize, Pulse, PulseBasis, SynthesisRequest};
use msgate::C64;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn pair25() -> GatePair {
    GatePair::new(2, 5, 7).unwrap()
}

fn standard(tau_us: f64, phi: bool) -> Pulse {
    synthesize(&SynthesisRequest::new(seven_ion_chain(), pair25(), tau_us * 1e-6).with_phi(phi)).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn lamb_dicke_sum_and_analytic_delta_chi() {
    let chain = seven_ion_chain();
    let s = chain.pair_eta_square_sum(pair25());
    assert!((s - 2.45e-2).abs() < 5e-5, "{s}");
    let d = delta_chi_analytic(&chain, pair25(), FRAC_PI_4);
    assert!((d + 9.62e-3).abs() < 2e-5, "{d}");
}

#[test]
fn delta_chi_is_quadratic_in_eta() {
    let chain = seven_ion_chain();
    let scaled = |c: f64| {
        let eta = (0..7).map(|p| (0..7).map(|j| c * chain.eta(p, j)).collect()).collect();
        ChainSpec::new(chain.mode_freqs().to_vec(), eta).unwrap()
    };
    let d1 = delta_chi_analytic(&chain, pair25(), FRAC_PI_4);
    let d2 = delta_chi_analytic(&scaled(2.0), pair25(), FRAC_PI_4);
    assert!(close(d2, 4.0 * d1, 1e-14));
}

#[test]
fn zero_pulse_has_empty_budget() {
    let chain = seven_ion_chain();
    let basis = PulseBasis::default_for(&chain, 300e-6).unwrap();
    let pulse = Pulse::new(basis, vec![0.0; basis.size()]).unwrap();
    let b = ErrorBudget::new(&chain, pair25(), &pulse);
    for (name, v) in b.gammas() {
        assert_eq!(v, 0.0, "{name}");
    }
    assert_eq!(b.phi_value, 0.0);
    assert_eq!(b.phi_infidelity, 0.0);
}

#[test]
fn maxima_match_brute_force_enumeration() {
    let chain = seven_ion_chain();
    let pulse = standard(200.0, false);
    let w = chain.mode_freqs();
    let modes = [0usize, 3, 6];
    let (a, b) = pair25().indices();
    let signs = [1.0, -1.0];

    let mut g2 = 0.0f64;
    let mut g3m = 0.0f64;
    let mut g03p = 0.0f64;
    let mut g12a = 0.0f64;
    let mut g13d = 0.0f64;
    for j in [a, b] {
        for &p in &modes {
            for &q in &modes {
                for sq in signs {
                    let e = chain.eta(p, j) * chain.eta(q, j);
                    g2 = g2.max((e * eval_q(&pulse, w[p] + sq * w[q]).value.norm()).abs());
                }
                for &r in &modes {
                    let e3 = (chain.eta(p, j) * chain.eta(q, j) * chain.eta(r, j)).abs();
                    g3m = g3m.max(e3 * eval_q(&pulse, w[p] + w[q] - w[r]).value.norm() / 6.0);
                    g03p = g03p.max(e3 * eval_f(&pulse, w[p] + w[q] + w[r]).value.norm() / 6.0);
                    let e13 = (chain.eta(p, j).powi(2) * chain.eta(q, j) * chain.eta(r, j)).abs();
                    for s in signs {
                        g13d = g13d.max(e13 * eval_sp(&pulse, w[p], w[q] + s * w[r]).value.norm());
                        for sp in signs {
                            for sr in signs {
                                let z = eval_z(&pulse, sp * w[p], s * w[q] + sr * w[r]).value;
                                g12a = g12a.max(e3 * z.norm());
                            }
                        }
                    }
                }
            }
        }
    }
    let f = first_order_over(&chain, pair25(), &pulse, &modes);
    let s = second_order_over(&chain, pair25(), &pulse, &modes);
    assert!(close(f.gamma2, g2, 1e-9), "{} {g2}", f.gamma2);
    assert!(close(f.gamma3_minus, g3m, 1e-9), "{} {g3m}", f.gamma3_minus);
    assert!(close(s.gamma03_plus, g03p, 1e-9), "{} {g03p}", s.gamma03_plus);
    assert!(close(s.gamma12_a, g12a, 1e-9), "{} {g12a}", s.gamma12_a);
    assert!(close(s.gamma13_d, g13d, 1e-9), "{} {g13d}", s.gamma13_d);
}

#[test]
fn standard_pulse_magnitudes_at_300us() {
    let chain = seven_ion_chain();
    let b = ErrorBudget::new(&chain, pair25(), &standard(300.0, false));
    // order-of-magnitude references; the exact values depend on the basis
    let decade = |v: f64, reference: f64| (v / reference).log10().abs() < 1.0;
    assert!(decade(b.gamma3_minus, 3.1e-4), "{}", b.gamma3_minus);
    assert!(decade(b.gamma4, 1.1e-7), "{}", b.gamma4);
    assert!(decade(b.gamma01, 1.8e-6), "{}", b.gamma01);
    assert!(decade(b.gamma13_d, 1.17e-3), "{}", b.gamma13_d);
    assert!(decade(b.gamma001, 1.2e-6), "{}", b.gamma001);
    assert!(decade(b.lambda, 1.17e-2), "{}", b.lambda);
    // γ₁₃^{(d)} dominates the second order
    assert!(b.gamma13_d > 100.0 * b.gamma12_a.max(b.gamma12_c));
    for (name, v) in b.gammas() {
        assert!(v >= 0.0 && v.is_finite(), "{name}");
    }
    let want = (4.0 * b.lambda / PI).powi(2);
    assert!(close(b.phi_infidelity, want, 1e-12));
    assert!(close(b.total_estimate, b.delta_chi_analytic.powi(2) + want, 1e-14));
}

#[test]
fn phi_constrained_pulses_have_zero_phi_budget() {
    let chain = seven_ion_chain();
    for tau in [100.0, 200.0, 300.0, 400.0, 500.0, 600.0] {
        let pulse = standard(tau, true);
        assert_eq!(phi_value(&chain, pair25(), &pulse), 0.0, "{tau} us");
        assert_eq!(phi_infidelity(&chain, pair25(), &pulse, FRAC_PI_4), 0.0);
        let b = ErrorBudget::new(&chain, pair25(), &pulse);
        assert_eq!(b.calibrated_estimate, 0.0);
        assert!(close(b.total_estimate, b.delta_chi_analytic.powi(2), 1e-15));
    }
}

#[test]
fn general_chi_form_matches_anticommuting_closed_form() {
    let a = pauli2(1, 3) + pauli2(3, 1);
    let omega = DMatrix::identity(1, 1);
    let mut psi0 = DVector::zeros(4);
    psi0[0] = C64::new(1.0, 0.0);
    for chi in [0.3, FRAC_PI_4, 1.2] {
        let phi = 2.5e-3;
        let want = anticommuting_infidelity(chi, 4.0 * phi, &a, &omega, &psi0);
        assert!(close(phi_infidelity_from(phi, chi), want, 1e-12), "{chi}");
    }
}

#[test]
fn sweep_over_seven_ions() {
    let chain = seven_ion_chain();
    let mut opts = SweepOptions::new(300e-6);
    let rows = sweep_phi_histogram(&chain, &opts).unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.error.is_none()));
    let r25 = rows.iter().find(|r| (r.ion1, r.ion2) == (2, 5)).unwrap();
    let direct = phi_infidelity(&chain, pair25(), &standard(300.0, false), FRAC_PI_4);
    assert!(close(r25.phi_infidelity.unwrap(), direct, 1e-9));

    opts.jobs = 3;
    assert_eq!(sweep_phi_histogram(&chain, &opts).unwrap(), rows);

    let values: Vec<f64> = rows.iter().filter_map(|r| r.phi_infidelity).collect();
    let hist = histogram(&values, 1.0).unwrap();
    assert_eq!(hist.iter().map(|b| b.count).sum::<usize>(), 21);

    opts.enforce_phi = true;
    let rows = sweep_phi_histogram(&chain, &opts).unwrap();
    assert!(rows.iter().all(|r| r.phi_infidelity == Some(0.0)));

    opts.all_pairs = false;
    assert_eq!(sweep_phi_histogram(&chain, &opts).unwrap().len(), 6);
}

#[test]
fn budget_json_round_trip() {
    let b = ErrorBudget::new(&seven_ion_chain(), pair25(), &standard(400.0, false));
    assert_eq!(ErrorBudget::from_json(&b.to_json().unwrap()).unwrap(), b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gammas_grow_with_the_mode_set(mask in 1u8..127, extra in 0usize..7) {
        let chain = seven_ion_chain();
        let pulse = standard(200.0, false);
        let small: Vec<usize> = (0..7).filter(|p| mask >> p & 1 == 1).collect();
        let mut big = small.clone();
        if !big.contains(&extra) {
            big.push(extra);
            big.sort();
        }
        let (fs, fb) = (first_order_over(&chain, pair25(), &pulse, &small), first_order_over(&chain, pair25(), &pulse, &big));
        let (ss, sb) = (second_order_over(&chain, pair25(), &pulse, &small), second_order_over(&chain, pair25(), &pulse, &big));
        let (hs, hb) = (higher_order_over(&chain, pair25(), &pulse, &small), higher_order_over(&chain, pair25(), &pulse, &big));
        let pairs = [
            (fs.gamma2, fb.gamma2), (fs.gamma3_plus, fb.gamma3_plus), (fs.gamma3_minus, fb.gamma3_minus),
            (fs.gamma4, fb.gamma4), (ss.gamma01, sb.gamma01), (ss.gamma03_plus, sb.gamma03_plus),
            (ss.gamma03_minus, sb.gamma03_minus), (ss.gamma12_a, sb.gamma12_a), (ss.gamma12_c, sb.gamma12_c),
            (ss.gamma13_d, sb.gamma13_d), (hs.gamma003, hb.gamma003), (hs.gamma012, hb.gamma012),
            (hs.gamma012_yz, hb.gamma012_yz), (hs.gamma013, hb.gamma013),
            (gamma001_over(&chain, pair25(), &pulse, &small), gamma001_over(&chain, pair25(), &pulse, &big)),
        ];
        for (i, (s, b)) in pairs.iter().enumerate() {
            prop_assert!(s <= b, "entry {i}: {s} > {b}");
        }
    }

    #[test]
    fn budget_scales_with_pulse_amplitude(c in 0.2f64..3.0, tau in prop::sample::select(vec![200.0, 400.0])) {
        let chain = seven_ion_chain();
        let pulse = standard(tau, false);
        let b1 = ErrorBudget::new(&chain, pair25(), &pulse);
        let bc = ErrorBudget::new(&chain, pair25(), &pulse.scale(c).unwrap());
        let checks = [
            (b1.gamma2, bc.gamma2, 1), (b1.gamma4, bc.gamma4, 1), (b1.gamma01, bc.gamma01, 2),
            (b1.gamma12_a, bc.gamma12_a, 2), (b1.gamma13_d, bc.gamma13_d, 2), (b1.gamma001, bc.gamma001, 3),
            (b1.higher_order.gamma003, bc.higher_order.gamma003, 3), (b1.higher_order.gamma013, bc.higher_order.gamma013, 3),
            (b1.phi_value, bc.phi_value, 3),
        ];
        for (i, (a, b, k)) in checks.iter().enumerate() {
            prop_assert!(close(*b, a * c.powi(*k), 1e-9), "entry {i}: {b} vs {a}·c^{k}");
        }
        // Φ is cubic in g, so at a fixed gate angle the infidelity goes as c⁶
        let f1 = phi_infidelity(&chain, pair25(), &pulse, FRAC_PI_4);
        let fc = phi_infidelity(&chain, pair25(), &pulse.scale(c).unwrap(), FRAC_PI_4);
        prop_assert!(close(fc, f1 * c.powi(6), 1e-9));
        // Δχ depends on the chain only
        prop_assert!(close(delta_chi_analytic(&chain, pair25(), FRAC_PI_4), -FRAC_PI_4 / 2.0 * chain.pair_eta_square_sum(pair25()), 1e-15));
    }
}
