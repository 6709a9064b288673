//! Closed-form functionals against independent adaptive quadrature.

use std::f64::consts::PI;

use msgate::chain::{seven_ion_chain, ChainSpec, GatePair};
use msgate::functionals::{self as fx, oracle, Method};
use msgate::pulse::{chi_kernel, quadratic_form, synthesize, Pulse, PulseBasis, SynthesisRequest};
use msgate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100;

fn agree(a: C64, b: C64) -> bool {
    (a - b).norm() <= f64::max(1e-12, 1e-9 * b.norm())
}

/// Random pulse with ‖g‖τ of order one on a basis bracketing the bundled chain's mode band.
fn random_pulse(rng: &mut ChaCha8Rng, chain: &ChainSpec) -> Pulse {
    let tau = rng.gen_range(10e-6..30e-6);
    let basis = PulseBasis::default_for(chain, tau).unwrap();
    let coeffs = (0..basis.size()).map(|_| rng.gen_range(-1.0..1.0) / tau).collect();
    Pulse::new(basis, coeffs).unwrap()
}

fn random_w(rng: &mut ChaCha8Rng, chain: &ChainSpec) -> f64 {
    let wmax = chain.mode_freqs()[chain.n_ions() - 1];
    rng.gen_range(-2.5 * wmax..2.5 * wmax)
}

#[test]
fn big_g_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let t = rng.gen_range(0.0..p.tau());
        let c = fx::eval_big_g(&p, t).unwrap();
        let q = oracle::big_g(&p, t).value;
        assert!(agree(C64::new(c, 0.0), q), "G({t}) {c} vs {q}");
    }
}

#[test]
fn q_and_f_match_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    while done < DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let w = random_w(&mut rng, &chain);
        let q = fx::eval_q(&p, w);
        let f = fx::eval_f(&p, w);
        if q.method != Method::ClosedForm || f.method != Method::ClosedForm {
            continue;
        }
        let qo = oracle::q(&p, w).value;
        let fo = oracle::f(&p, w).value;
        assert!(agree(q.value, qo), "Q({w}) {} vs {qo}", q.value);
        assert!(agree(f.value, fo), "f({w}) {} vs {fo}", f.value);
        done += 1;
    }
}

#[test]
fn z_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let (w1, w2) = (random_w(&mut rng, &chain), random_w(&mut rng, &chain));
        let z = fx::eval_z(&p, w1, w2).value;
        let zo = oracle::z(&p, w1, w2).value;
        assert!(agree(z, zo), "Z({w1},{w2}) {z} vs {zo}");
    }
}

#[test]
fn sp_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let mode = rng.gen_range(0..chain.n_ions());
        let w = random_w(&mut rng, &chain);
        let wp = chain.mode_freqs()[mode];
        let s = fx::eval_sp(&p, wp, w).value;
        let so = oracle::sp(&p, wp, w).value;
        assert!(agree(s, so), "S_{mode}({w}) {s} vs {so}");
    }
}

#[test]
fn jp_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let wp = chain.mode_freqs()[rng.gen_range(0..chain.n_ions())];
        let j = fx::eval_jp(&p, wp).value;
        let jo = oracle::jp(&p, wp).value;
        assert!(agree(j, jo), "J {j} vs {jo}");
    }
}

#[test]
fn chi_kernel_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs = GatePair::all(7);
    for _ in 0..DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let pair = pairs[rng.gen_range(0..pairs.len())];
        let k = chi_kernel(&chain, pair, p.basis());
        let chi = quadratic_form(&k, &p.coeffs);
        let chio = oracle::chi(&chain, pair, &p).value;
        assert!(agree(C64::new(chi, 0.0), chio), "chi {chi} vs {chio}");
        let via_sp = fx::chi_from_sp(&chain, pair, &p);
        assert!((via_sp - chi).abs() <= f64::max(1e-12, 1e-9 * chi.abs()));
    }
}

#[test]
fn chi_kernel_is_symmetric_and_quadratic() {
    let chain = seven_ion_chain();
    let pair = GatePair::new(2, 5, 7).unwrap();
    let basis = PulseBasis::new(40e-6, 115, 126).unwrap();
    let k = chi_kernel(&chain, pair, basis);
    assert!((&k - k.transpose()).amax() == 0.0);
    let b: Vec<f64> = (0..basis.size()).map(|i| (i as f64 * 0.7).sin() * 1e5).collect();
    let b2: Vec<f64> = b.iter().map(|x| 3.0 * x).collect();
    let (c1, c2) = (quadratic_form(&k, &b), quadratic_form(&k, &b2));
    assert!((c2 - 9.0 * c1).abs() <= 1e-13 * c2.abs());
}

#[test]
fn chi_tilde_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pair = GatePair::new(2, 5, 7).unwrap();
    for _ in 0..20 {
        let p = random_pulse(&mut rng, &chain);
        let c = fx::eval_chi_tilde(&chain, pair, &p);
        let co = oracle::chi_tilde(&chain, pair, &p).value;
        assert!(agree(C64::new(c, 0.0), co), "chi~ {c} vs {co}");
    }
}

#[test]
fn phi_paths_agree_on_closed_pulses() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs = GatePair::all(7);
    for _ in 0..DRAWS {
        let tau = rng.gen_range(10e-6..30e-6);
        let pair = pairs[rng.gen_range(0..pairs.len())];
        let basis = PulseBasis::default_for(&chain, tau).unwrap();
        let req = SynthesisRequest::new(chain.clone(), pair, tau).with_basis(basis.n_min, basis.n_max + 3);
        let p = match synthesize(&req) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let phi = fx::eval_phi(&chain, pair, &p);
        let po = oracle::phi(&chain, pair, &p).value.re;
        let tol = |v: f64| f64::max(1e-12, 1e-9 * v.abs());
        assert!((phi.double_integral - po).abs() <= tol(po), "{phi:?} vs {po}");
        assert!((phi.closed_form - po).abs() <= tol(po).max(1e-9), "{phi:?} vs {po}");
    }
}

#[test]
fn phi_sum_integral_identity() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let lhs = p.phi_sum();
        let rhs = 2.0 * PI / p.tau().powi(2) * oracle::mean_big_g_integral(&p).value.re;
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0 / p.tau()), "{lhs} vs {rhs}");
    }
}

fn far_from_z_poles(p: &Pulse, w1: f64, w2: f64) -> bool {
    let eps = 1e-3 * 2.0 * PI / p.tau();
    let ws: Vec<f64> = p.basis_freqs();
    ws.iter().all(|&a| {
        (w1.abs() - a).abs() > eps
            && (w2.abs() - a).abs() > eps
            && ws.iter().all(|&b| ((w1 + w2).abs() - (a + b)).abs() > eps && ((w1 + w2).abs() - (a - b).abs()).abs() > eps)
    })
}

#[test]
fn printed_z_form_matches_quadrature() {
    let chain = seven_ion_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut done = 0;
    while done < DRAWS {
        let p = random_pulse(&mut rng, &chain);
        let (w1, w2) = (random_w(&mut rng, &chain), random_w(&mut rng, &chain));
        if !far_from_z_poles(&p, w1, w2) {
            continue;
        }
        let z = fx::z_pole_fraction_form(&p, w1, w2);
        let zo = oracle::z(&p, w1, w2).value;
        assert!(agree(z, zo), "Z({w1},{w2}) {z} vs {zo}");
        done += 1;
    }
}

#[test]
fn printed_f_form_needs_vanishing_mean() {
    let chain = seven_ion_chain();
    let pair = GatePair::new(2, 5, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = PulseBasis::default_for(&chain, 20e-6).unwrap();
    let req = SynthesisRequest::new(chain.clone(), pair, 20e-6).with_basis(b.n_min, b.n_max + 4);
    let p = synthesize(&req.clone().with_phi(true)).unwrap();
    let q = synthesize(&req).unwrap();
    for _ in 0..20 {
        let w = random_w(&mut rng, &chain);
        let (fp, fq) = (fx::eval_f(&p, w), fx::eval_f(&q, w));
        if fp.method != Method::ClosedForm || fq.method != Method::ClosedForm {
            continue;
        }
        assert!(agree(fx::f_pole_fraction_form(&p, w), fp.value));
        let gap = (fx::f_pole_fraction_form(&q, w) - fq.value).norm();
        assert!(gap > 1e-6 * fq.value.norm(), "{gap}");
    }
}
