use dynct_core::dynamic::forward_dynamic;
use dynct_core::fbp::{filter_sinogram, FbpConfig};
use dynct_core::radon::{backproject_static, forward_static};
use dynct_core::{AffineMotion, Image, ImageGrid, ScanGeometry, Sinogram};
use proptest::prelude::*;

fn grid() -> ImageGrid {
    ImageGrid::new(12).unwrap()
}

fn geom() -> ScanGeometry {
    ScanGeometry::new(7, 9).unwrap()
}

fn image() -> impl Strategy<Value = Image> {
    prop::collection::vec(-1.0f64..1.0, 144).prop_map(|v| Image::from_values(grid(), v).unwrap())
}

fn sinogram() -> impl Strategy<Value = Sinogram> {
    prop::collection::vec(-1.0f64..1.0, 7 * 19).prop_map(|v| Sinogram::from_values(geom(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projector_adjoint_pair(f in image(), g in sinogram()) {
        let lhs = forward_static(&f, geom()).dot(&g).unwrap();
        let rhs = f.dot(&backproject_static(&g, grid())).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn projector_is_linear(f in image(), g in image(), a in -3.0f64..3.0) {
        let mut combo = Image::zeros(grid());
        for ((c, x), y) in combo.values_mut().iter_mut().zip(f.values()).zip(g.values()) {
            *c = a * x + y;
        }
        let rf = forward_static(&f, geom());
        let rg = forward_static(&g, geom());
        let rc = forward_static(&combo, geom());
        for ((c, x), y) in rc.values().iter().zip(rf.values()).zip(rg.values()) {
            prop_assert!((c - (a * x + y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_motion_is_static(f in image()) {
        let m = AffineMotion::identity(7).unwrap();
        let d = forward_dynamic(&f, &m, geom()).unwrap();
        let s = forward_static(&f, geom());
        for (a, b) in d.values().iter().zip(s.values()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn static_filter_commutes_with_offset_reversal(g in sinogram()) {
        // the static kernel is even, so mirroring every row in s commutes with filtering
        let m = AffineMotion::identity(7).unwrap();
        let cfg = FbpConfig::for_geometry(geom(), 8).unwrap();
        let mut mirrored = g.clone();
        for row in mirrored.values_mut().chunks_mut(19) {
            row.reverse();
        }
        let a = filter_sinogram(&g, &m, &cfg).unwrap();
        let mut b = filter_sinogram(&mirrored, &m, &cfg).unwrap();
        for row in b.values_mut().chunks_mut(19) {
            row.reverse();
        }
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}
