//! Fock-space simulator against dense brute-force constructions.

use msgate::chain::{mhz_to_rad, seven_ion_chain, ChainSpec, GatePair};
use msgate::fock::{
    displacement_elements, hs_sector_infidelity, propagate, single_mode_displacement, v_power_elements, Hamiltonian,
    HamiltonianKind, HamiltonianSpec, JointState, PhononScheme,
};
use msgate::pulse::{chi_of, synthesize, Pulse, PulseBasis, SynthesisRequest};
use msgate::C64;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// e^{iη(a+a†)} on a `dim`-level truncation by eigendecomposition.
fn brute_exp(eta: f64, dim: usize, sign: f64) -> DMatrix<C64> {
    let x = DMatrix::from_fn(dim, dim, |n, m| {
        if n == m + 1 {
            eta * (n as f64).sqrt()
        } else if m == n + 1 {
            eta * (m as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(x);
    let v = eig.eigenvectors.map(|a| C64::new(a, 0.0));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, sign * l)));
    &v * d * v.transpose()
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

#[test]
fn single_mode_elements_match_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eta = rng.gen_range(-0.1..0.1);
        let d = rng.gen_range(1..=8);
        let ours = single_mode_displacement(eta, d);
        let exact = brute_exp(eta, 40, 1.0);
        for n in 0..d {
            for m in 0..d {
                worst = worst.max((ours[(n, m)] - exact[(n, m)]).norm());
            }
        }
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn multimode_cos_sin_match_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let occ = vec![rng.gen_range(0..4u32), rng.gen_range(0..4u32), rng.gen_range(0..3u32)];
        let scheme = PhononScheme::new(occ.clone()).unwrap();
        let eta: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let (c, s) = displacement_elements(&eta, &scheme).unwrap();
        let block = |sign: f64| {
            let mats: Vec<DMatrix<C64>> = eta
                .iter()
                .zip(&occ)
                .map(|(&e, &m)| brute_exp(e, 40, sign).view((0, 0), (m as usize + 1, m as usize + 1)).into_owned())
                .collect();
            kron(&kron(&mats[0], &mats[1]), &mats[2])
        };
        let (ep, em) = (block(1.0), block(-1.0));
        let cos = (&ep + &em) / C64::new(2.0, 0.0);
        let sin = (&ep - &em) / C64::new(0.0, 2.0);
        let err_c = (cos - c.map(|x| C64::new(x, 0.0))).map(|z| z.norm()).max();
        let err_s = (sin - s.map(|x| C64::new(x, 0.0))).map(|z| z.norm()).max();
        assert!(err_c < 1e-10 && err_s < 1e-10, "{err_c} {err_s}");
        assert!((&c - c.transpose()).amax() < 1e-15);
    }
}

#[test]
fn v_powers_match_explicit_sums() {
    let scheme = PhononScheme::parse("12").unwrap();
    let eta = [0.07, -0.05];
    let d = scheme.dim();
    // ⟨i|V|j⟩ from the ladder rules, mode by mode
    let v1 = DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = (scheme.occupations(i), scheme.occupations(j));
        let mut x = 0.0;
        for p in 0..2 {
            let others_equal = (0..2).filter(|&q| q != p).all(|q| a[q] == b[q]);
            if others_equal && a[p] == b[p] + 1 {
                x += eta[p] * (a[p] as f64).sqrt();
            }
            if others_equal && b[p] == a[p] + 1 {
                x += eta[p] * (b[p] as f64).sqrt();
            }
        }
        x
    });
    let v2 = DMatrix::from_fn(d, d, |i, j| (0..d).map(|k| v1[(i, k)] * v1[(k, j)]).sum::<f64>());
    assert!((v_power_elements(&eta, &scheme, 1).unwrap() - &v1).amax() < 1e-16);
    assert!((v_power_elements(&eta, &scheme, 2).unwrap() - &v2).amax() < 1e-16);
    let v5 = v_power_elements(&eta, &scheme, 5).unwrap();
    assert!((v5 - &v2 * &v2 * &v1).amax() < 1e-16);
    assert!(v_power_elements(&eta, &scheme, 6).is_err());
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

fn test_pulse(chain: &ChainSpec, tau: f64) -> Pulse {
    let pair = GatePair::new(2, 5, 7).unwrap();
    let b = PulseBasis::default_for(chain, tau).unwrap();
    synthesize(&SynthesisRequest::new(chain.clone(), pair, tau).with_basis(b.n_min, b.n_max + 2)).unwrap()
}

/// Dense H(t) from static element matrices with phases e^{iΣω_pΔn_p t}.
fn dense_hamiltonian(spec: &HamiltonianSpec, scheme: &PhononScheme, t: f64) -> DMatrix<C64> {
    let d = scheme.dim();
    let phase: Vec<f64> = (0..d)
        .map(|i| scheme.occupations(i).iter().zip(spec.chain.mode_freqs()).map(|(&n, w)| n as f64 * w).sum())
        .collect();
    let (j1, j2) = spec.pair.indices();
    let sy = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
    let sx = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let id2 = DMatrix::<C64>::identity(2, 2);
    let mut h = DMatrix::<C64>::zeros(4 * d, 4 * d);
    for (slot, j) in [j1, j2].into_iter().enumerate() {
        let eta = spec.chain.ion_column(j);
        let (c, s) = match spec.kind {
            HamiltonianKind::FullMs => displacement_elements(&eta, scheme).unwrap(),
            HamiltonianKind::Expanded { nc, ns } => {
                let mut c = DMatrix::zeros(d, d);
                let mut s = DMatrix::zeros(d, d);
                let mut fact = 1.0;
                for k in 0..=5u32 {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    let vk = v_power_elements(&eta, scheme, k).unwrap() * (sign / fact);
                    if k % 2 == 0 && k as i32 <= nc {
                        c += vk;
                    } else if k % 2 == 1 && k as i32 <= ns {
                        s += vk;
                    }
                }
                (c, s)
            }
        };
        let timed = |m: &DMatrix<f64>| DMatrix::from_fn(d, d, |i, k| m[(i, k)] * C64::from_polar(1.0, (phase[i] - phase[k]) * t));
        let (ct, st) = (timed(&c), timed(&s));
        let (py, px) = if slot == 0 { (kron(&sy, &id2), kron(&sx, &id2)) } else { (kron(&id2, &sy), kron(&id2, &sx)) };
        h += kron(&py, &ct) + kron(&px, &st);
    }
    h * C64::new(spec.pulse.g(t), 0.0)
}

#[test]
fn kronecker_action_matches_dense_elements() {
    let chain = seven_ion_chain();
    let pair = GatePair::new(2, 5, 7).unwrap();
    let pulse = test_pulse(&chain, 40e-6);
    let scheme = PhononScheme::parse("2121101").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for kind in ["full", "-2,1", "0,1", "2,3", "4,5", "0,5", "4,1"] {
        let spec = HamiltonianSpec::new(HamiltonianKind::parse(kind).unwrap(), chain.clone(), pair, pulse.clone());
        let h = Hamiltonian::new(&spec, &scheme).unwrap();
        for _ in 0..3 {
            let t = rng.gen_range(0.0..pulse.tau());
            let psi = random_state(&mut rng, h.dim());
            let mut out = vec![C64::new(0.0, 0.0); h.dim()];
            h.apply(t, &psi, &mut out);
            let dense = dense_hamiltonian(&spec, &scheme, t) * DVector::from_vec(psi.clone());
            let scale = dense.norm();
            let err = out.iter().zip(dense.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12 * scale, "{kind}: {err} vs {scale}");
        }
    }
}

#[test]
fn hamiltonian_is_hermitian() {
    let chain = seven_ion_chain();
    let pair = GatePair::new(3, 6, 7).unwrap();
    let pulse = test_pulse(&chain, 40e-6);
    let scheme = PhononScheme::parse("3221111").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for kind in ["full", "-2,1", "4,5"] {
        let spec = HamiltonianSpec::new(HamiltonianKind::parse(kind).unwrap(), chain.clone(), pair, pulse.clone());
        let h = Hamiltonian::new(&spec, &scheme).unwrap();
        for _ in 0..5 {
            let t = rng.gen_range(0.0..pulse.tau());
            let (phi, psi) = (random_state(&mut rng, h.dim()), random_state(&mut rng, h.dim()));
            let (mut hphi, mut hpsi) = (vec![C64::new(0.0, 0.0); h.dim()], vec![C64::new(0.0, 0.0); h.dim()]);
            h.apply(t, &phi, &mut hphi);
            h.apply(t, &psi, &mut hpsi);
            let a: C64 = phi.iter().zip(&hpsi).map(|(x, y)| x.conj() * y).sum();
            let b: C64 = psi.iter().zip(&hphi).map(|(x, y)| x.conj() * y).sum();
            let g = pulse.g(t).abs().max(1.0);
            assert!((a - b.conj()).norm() < 1e-13 * g, "{kind}: {a} vs {b}");
        }
    }
}

/// Two-ion chain with both modes inside a generous cutoff, so powers of V
/// applied to low-occupation states never reach the truncation edge.
fn two_ion_chain() -> ChainSpec {
    let (a, b) = (0.08, 0.06);
    ChainSpec::new(vec![mhz_to_rad(2.9), mhz_to_rad(3.0)], vec![vec![b, -b], vec![a, a]]).unwrap()
}

#[test]
fn expanded_forms_approach_full_action() {
    let chain = two_ion_chain();
    let pair = GatePair::new(1, 2, 2).unwrap();
    let basis = PulseBasis::new(20e-6, 55, 62).unwrap();
    let pulse = Pulse::new(basis, vec![1e5; 8]).unwrap();
    let scheme = PhononScheme::parse("99").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let d = scheme.dim();
    let t = 3.3e-6;
    let mut psi = vec![C64::new(0.0, 0.0); 4 * d];
    for c in 0..4 {
        psi[c * d] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let apply = |kind: HamiltonianKind| {
        let h = Hamiltonian::new(&HamiltonianSpec::new(kind, chain.clone(), pair, pulse.clone()), &scheme).unwrap();
        let mut out = vec![C64::new(0.0, 0.0); 4 * d];
        h.apply(t, &psi, &mut out);
        out
    };
    let full = apply(HamiltonianKind::FullMs);
    let diff = |kind: &str| {
        let o = apply(HamiltonianKind::parse(kind).unwrap());
        o.iter().zip(&full).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    };
    let seq: Vec<f64> = ["-2,1", "0,1", "2,3", "4,5"].iter().map(|k| diff(k)).collect();
    for w in seq.windows(2) {
        assert!(w[1] < w[0], "{seq:?}");
    }
    // remainder of cos/sin beyond V⁵, leading terms ‖V⁶ψ‖/6! and ‖V⁷ψ‖/7! per ion
    let g = pulse.g(t).abs();
    let mut bound = 0.0;
    for j in 0..2 {
        let eta = chain.ion_column(j);
        let v1 = v_power_elements(&eta, &scheme, 1).unwrap();
        let v6 = v_power_elements(&eta, &scheme, 5).unwrap() * &v1;
        let v7 = &v6 * &v1;
        for c in 0..4 {
            let x = DVector::from_fn(d, |k, _| psi[c * d + k]);
            let (n6, n7) = ((v6.map(|a| C64::new(a, 0.0)) * &x).norm(), (v7.map(|a| C64::new(a, 0.0)) * &x).norm());
            bound += 1.1 * g * (n6 / 720.0 + n7 / 5040.0);
        }
    }
    assert!(seq[3] < bound, "{} vs {bound}", seq[3]);
    assert!(seq[3] < 1e-6 * g);
}

#[test]
fn zero_pulse_leaves_state_unchanged() {
    let chain = seven_ion_chain();
    let pair = GatePair::new(2, 5, 7).unwrap();
    let pulse = Pulse::zero(PulseBasis::default_for(&chain, 20e-6).unwrap());
    let scheme = PhononScheme::parse("1111111").unwrap();
    let spec = HamiltonianSpec::new(HamiltonianKind::FullMs, chain, pair, pulse);
    let psi0 = JointState::product(&scheme, [C64::new(0.5, 0.0), C64::new(0.0, 0.5), C64::new(-0.5, 0.0), C64::new(0.5, 0.0)]);
    let run = propagate(&spec, &scheme, &psi0, 1e-8).unwrap();
    assert_eq!(run.state, psi0);
    assert_eq!(run.steps, 2000);
}

/// F_P of the channel built from four basis-state runs against e^{iχXX}.
fn process_fidelity_direct(runs: &[JointState], chi: f64) -> f64 {
    let (c, s) = (chi.cos(), chi.sin());
    // e^{iχXX}: |ab⟩ → cos χ|ab⟩ + i sin χ|āb̄⟩
    let d = runs[0].scheme().dim();
    let mut w = vec![C64::new(0.0, 0.0); d];
    for (ab, run) in runs.iter().enumerate() {
        let flip = 3 - ab;
        for k in 0..d {
            w[k] += c * run.block(ab)[k] + C64::new(0.0, -s) * run.block(flip)[k];
        }
    }
    w.iter().map(|a| a.norm_sqr()).sum::<f64>() / 16.0
}

#[test]
fn sector_factorization_matches_joint_hs_propagation() {
    let chain = seven_ion_chain();
    let pair = GatePair::new(2, 5, 7).unwrap();
    let pulse = test_pulse(&chain, 30e-6);
    let spec = HamiltonianSpec::new(HamiltonianKind::HS, chain.clone(), pair, pulse.clone());
    let dt = 5e-9;
    let chi = chi_of(&chain, pair, &pulse);
    for s in ["1111111", "2211111"] {
        let scheme = PhononScheme::parse(s).unwrap();
        let runs: Vec<JointState> = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(a, b)| propagate(&spec, &scheme, &JointState::basis(&scheme, a, b), dt).unwrap().state)
            .collect();
        let joint = 1.0 - process_fidelity_direct(&runs, chi);
        let sector = hs_sector_infidelity(&chain, pair, &pulse, &scheme, dt, chi).unwrap();
        // two RK4 discretizations of the same dynamics
        assert!((joint - sector).abs() < 1e-7, "{s}: joint {joint} sector {sector}");
    }
}
