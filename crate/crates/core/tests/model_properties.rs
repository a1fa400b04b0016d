mod common;

use std::f64::consts::PI;

use common::{random_density, random_hermitian};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qbattery::model::{
    anti_hermitian_residual, decay_min_eigenvalue, excitation_number_expectation, qubit_permutation_matrix,
    rank1_residual, Geometry, LindbladGenerator,
};
use qbattery::qubit::{apply_jump, partial_trace, DensityMatrix};
use qbattery::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn positions(l: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..=0.5, l).prop_map(|eps| eps.iter().enumerate().map(|(j, e)| j as f64 + 1.0 + e).collect())
}

fn system(max_l: usize) -> impl Strategy<Value = (Vec<f64>, f64, u64)> {
    (1..=max_l).prop_flat_map(|l| (positions(l), 0.1f64..4.0 * PI, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_identities((pos, kd, _) in system(10)) {
        let gen = LindbladGenerator::new(&Geometry::from_positions(pos).unwrap(), kd);
        prop_assert!(rank1_residual(&gen) <= 1e-12);
        prop_assert!(anti_hermitian_residual(&gen) <= 1e-12);
        prop_assert!(decay_min_eigenvalue(&gen) >= -1e-10);
        prop_assert!(gen.decay().iter().all(|g| g.abs() <= 2.0 + 1e-15));
    }

    #[test]
    fn trace_conserved_and_energy_dissipated((pos, kd, seed) in system(5)) {
        let l = pos.len();
        let gen = LindbladGenerator::new(&Geometry::from_positions(pos).unwrap(), kd);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(l, &mut rng);
        let d = gen.lindblad_rhs(&rho).unwrap();
        prop_assert!(d.trace().norm() <= 1e-12);
        prop_assert!(excitation_number_expectation(&d).re <= 1e-12);
        prop_assert!(d.hermiticity_error() <= 1e-12);
        // hermitian but indefinite inputs keep the trace too
        let h = random_hermitian(l, &mut rng);
        prop_assert!(gen.lindblad_rhs(&h).unwrap().trace().norm() <= 1e-12);
    }

    #[test]
    fn permutation_covariance((pos, kd, seed) in system(4)) {
        let l = pos.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // a random relabeling, drawn from the seed
        let mut perm: Vec<usize> = (1..=l).collect();
        for i in (1..l).rev() {
            perm.swap(i, rand::Rng::random_range(&mut rng, 0..=i));
        }
        let permuted: Vec<f64> = perm.iter().map(|&s| pos[s - 1]).collect();
        let gen = LindbladGenerator::new(&Geometry::from_positions(pos).unwrap(), kd);
        let gen_p = LindbladGenerator::new(&Geometry::from_positions(permuted).unwrap(), kd);
        let p = qubit_permutation_matrix(&perm);
        let rho = random_density(l, &mut rng);
        let rho_p = DensityMatrix::from_matrix(l, &p * rho.matrix() * p.adjoint()).unwrap();
        let lhs = gen_p.lindblad_rhs(&rho_p).unwrap();
        let rhs = &p * gen.lindblad_rhs(&rho).unwrap().matrix() * p.adjoint();
        prop_assert!((lhs.matrix() - rhs).camax() <= 1e-12);
    }

    #[test]
    fn jump_adjoint_identity((pos, _kd, seed) in system(4), j in 1usize..=4, jp in 1usize..=4) {
        // Tr[X σ_ge^j ρ σ_eg^j'] = Tr[σ_eg^j' X σ_ge^j ρ]
        let l = pos.len();
        prop_assume!(j <= l && jp <= l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(l, &mut rng);
        let x = random_density(l, &mut rng);
        let lhs = (x.matrix() * apply_jump(j, jp, &rho).unwrap().matrix()).trace();
        // dense σ_ge^site, independent of the kernels
        let lower = |site: usize| -> DMatrix<C64> {
            let d = 1usize << l;
            DMatrix::from_fn(d, d, |r, c| {
                let bit = 1usize << (site - 1);
                if c & bit != 0 && r == c ^ bit { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
            })
        };
        let rhs = (lower(jp).adjoint() * x.matrix() * lower(j) * rho.matrix()).trace();
        prop_assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn partial_trace_is_linear_and_trace_preserving(seed in any::<u64>(), a in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = random_density(4, &mut rng);
        let r2 = random_density(4, &mut rng);
        let mix = DensityMatrix::from_matrix(4, r1.matrix() * C64::new(a, 0.0) + r2.matrix()).unwrap();
        let keep = [1, 3];
        let lhs = partial_trace(&mix, &keep).unwrap();
        let rhs = partial_trace(&r1, &keep).unwrap().matrix() * C64::new(a, 0.0) + partial_trace(&r2, &keep).unwrap().matrix();
        prop_assert!((lhs.matrix() - rhs).camax() <= 1e-13);
        prop_assert!((lhs.trace() - mix.trace()).norm() <= 1e-13);
    }
}

#[test]
fn rank1_rhs_agrees_with_pair_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let pos: Vec<f64> = (1..=4).map(|j| j as f64 + rand::Rng::random_range(&mut rng, -0.5..=0.5)).collect();
        let kd = rand::Rng::random_range(&mut rng, 0.1..4.0 * PI);
        let gen = LindbladGenerator::new(&Geometry::from_positions(pos).unwrap(), kd);
        let rho = random_hermitian(4, &mut rng);
        let a = gen.lindblad_rhs(&rho).unwrap();
        let b = gen.rhs_rank1(&rho).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-12, "{}", a.max_abs_diff(&b));
    }
}

#[test]
fn nodes_switch_off_the_dissipator() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for kd in [PI, 2.0 * PI, 3.0 * PI] {
        let gen = LindbladGenerator::new(&Geometry::from_positions(vec![1.0, 2.0, 3.0]).unwrap(), kd);
        assert!(gen.jump_vector().iter().all(|v| *v == 0.0));
        assert!(gen.decay().iter().all(|g| *g == 0.0));
        // with Γ ≡ 0 the generator is −i[H, ρ] and preserves purity to first order
        let rho = random_density(3, &mut rng);
        let d = gen.rhs_rank1(&rho).unwrap();
        let dpurity = (d.matrix() * rho.matrix()).trace().re;
        assert!(dpurity.abs() < 1e-14);
    }
    let ground = DensityMatrix::charged(3, 0).unwrap();
    let gen = LindbladGenerator::new(&Geometry::from_positions(vec![1.0, 2.2, 3.1]).unwrap(), 2.7 * PI);
    assert_eq!(gen.lindblad_rhs(&ground).unwrap().matrix().camax(), 0.0);
}
