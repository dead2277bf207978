//! Property tests for the structural invariants: kernel symmetry and
//! scaling, SDF union/scaling laws, and rook-class symmetry.

use cylstable::connectivity::{rook_components, same_class};
use cylstable::geometry::{paper_domain, CatalogId, Domain, Shape};
use cylstable::stable::{product_kernel, AlphaParam};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_swap_is_bitwise_symmetric(
        alpha in 0.3f64..1.9,
        t in 0.05f64..4.0,
        x0 in -5.0f64..5.0, x1 in -5.0f64..5.0,
        y0 in -5.0f64..5.0, y1 in -5.0f64..5.0,
    ) {
        let params = AlphaParam::new(alpha, 2).unwrap();
        let a = product_kernel(&params, t, &[x0, x1], &[y0, y1]).unwrap();
        let b = product_kernel(&params, t, &[y0, y1], &[x0, x1]).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn kernel_scaling_identity(
        alpha in 0.4f64..1.8,
        t in 0.1f64..2.0,
        lam in 0.5f64..4.0,
        x0 in -3.0f64..3.0, x1 in -3.0f64..3.0,
        y0 in -3.0f64..3.0, y1 in -3.0f64..3.0,
    ) {
        let params = AlphaParam::new(alpha, 2).unwrap();
        let rhs = product_kernel(&params, t, &[x0, x1], &[y0, y1]).unwrap();
        let lhs = lam.powi(-2)
            * product_kernel(
                &params,
                lam.powf(-alpha) * t,
                &[x0 / lam, x1 / lam],
                &[y0 / lam, y1 / lam],
            )
            .unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs(), "lhs {} rhs {}", lhs, rhs);
    }

    #[test]
    fn union_sdf_dominates_members(
        px in -4.0f64..4.0, py in -4.0f64..4.0,
        c1x in -2.0f64..0.0, c1y in -2.0f64..2.0, r1 in 0.3f64..1.5,
        c2x in 0.0f64..2.0, c2y in -2.0f64..2.0, r2 in 0.3f64..1.5,
    ) {
        let b1 = Shape::Ball { center: vec![c1x, c1y], radius: r1 };
        let b2 = Shape::Ball { center: vec![c2x, c2y], radius: r2 };
        let u = Domain::new(Shape::Union(vec![b1.clone(), b2.clone()])).unwrap();
        let p = [px, py];
        let m = b1.sdf(&p).max(b2.sdf(&p));
        prop_assert_eq!(u.signed_distance(&p).to_bits(), m.to_bits());
    }

    #[test]
    fn catalog_sdf_scales_linearly(
        which in 0usize..7,
        lam in 0.25f64..4.0,
        px in -6.0f64..8.0, py in -6.0f64..8.0,
    ) {
        let id = CatalogId::ALL[which];
        let d1 = paper_domain(id, 1.0).unwrap();
        let dl = paper_domain(id, lam).unwrap();
        let want = lam * d1.signed_distance(&[px, py]);
        let got = dl.signed_distance(&[lam * px, lam * py]);
        prop_assert!((want - got).abs() < 1e-10 * (1.0 + want.abs()), "{} vs {}", want, got);
    }
}

#[test]
fn same_class_is_symmetric_on_catalog() {
    for id in [CatalogId::FourSquares, CatalogId::DiagonalBalls63, CatalogId::ParallelBalls] {
        let d = paper_domain(id, 1.0).unwrap();
        let g = rook_components(&d, 0.05).unwrap();
        let key = cylstable::rng::StreamKey::new(17);
        let (lo, hi) = d.bbox();
        let mut checked = 0;
        let mut i = 0u64;
        while checked < 50 && i < 20_000 {
            i += 1;
            let s = key.substream(i);
            let x = [lo[0] + (hi[0] - lo[0]) * s.uniform_at(0), lo[1] + (hi[1] - lo[1]) * s.uniform_at(1)];
            let y = [lo[0] + (hi[0] - lo[0]) * s.uniform_at(2), lo[1] + (hi[1] - lo[1]) * s.uniform_at(3)];
            if !d.contains(&x) || !d.contains(&y) {
                continue;
            }
            checked += 1;
            assert_eq!(
                same_class(&g, &d, &x, &y).unwrap(),
                same_class(&g, &d, &y, &x).unwrap()
            );
        }
        assert!(checked >= 30);
    }
}
