use caffeine::agp::{exact_agp, identity_residual};
use caffeine::operators::{OperatorMatrix, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn hermitian(d: usize, v: &[f64]) -> OperatorMatrix {
    let mut m = DMatrix::<C64>::zeros(d, d);
    let mut it = v.iter().copied();
    for i in 0..d {
        m[(i, i)] = C64::new(it.next().unwrap(), 0.0);
        for j in 0..i {
            let z = C64::new(it.next().unwrap(), it.next().unwrap());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    OperatorMatrix::new(m).unwrap()
}

fn pair() -> impl Strategy<Value = (OperatorMatrix, OperatorMatrix)> {
    prop_oneof![Just(2usize), Just(4), Just(8)].prop_flat_map(|d| {
        let n = d * d;
        (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(move |(a, b)| (hermitian(d, &a), hermitian(d, &b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_potential_satisfies_its_defining_identity((h, dh) in pair()) {
        let a = exact_agp(&h, &dh).unwrap();
        prop_assert!(a.matrix.is_hermitian(1e-10));
        let r = identity_residual(&h, &dh, &a.matrix).unwrap();
        prop_assert!(r <= 1e-8 * dh.frobenius_norm().max(1.0), "residual {}", r);
    }

    #[test]
    fn gauge_potential_scales_inversely_with_the_hamiltonian((h, dh) in pair(), c in 0.2..5.0f64) {
        let a = exact_agp(&h, &dh).unwrap().matrix;
        let scaled = exact_agp(&h.scale(c), &dh).unwrap().matrix;
        prop_assert!(scaled.scale(c).max_abs_diff(&a) <= 1e-8 * a.max_abs().max(1.0));
        let linear = exact_agp(&h, &dh.scale(c)).unwrap().matrix;
        prop_assert!(linear.max_abs_diff(&a.scale(c)) <= 1e-8 * c * a.max_abs().max(1.0));
    }
}

#[test]
fn commuting_derivative_has_vanishing_gauge_potential() {
    let h = OperatorMatrix::from_diagonal(&[1.0, -0.5, 2.0, 0.3]).unwrap();
    let dh = OperatorMatrix::from_diagonal(&[0.2, 0.1, -1.0, 4.0]).unwrap();
    assert!(exact_agp(&h, &dh).unwrap().matrix.max_abs() < 1e-14);
}
