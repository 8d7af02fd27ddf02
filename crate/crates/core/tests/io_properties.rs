use lks_core::fieldio::{decode_binary, encode_binary, read_csv, write_csv};
use lks_core::grid::{Boundary, Field, Grid};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (2u32..7, 0.5f64..50.0).prop_map(|(e, l)| Grid::cube(1, l, 1 << e).unwrap()),
        (2u32..5, 2u32..5, 0.5f64..10.0, 0.5f64..10.0)
            .prop_map(|(a, b, la, lb)| Grid::periodic(&[la, lb], &[1 << a, 1 << b]).unwrap()),
        (4usize..40, 0.5f64..5.0).prop_map(|(n, l)| Grid::dirichlet(l, n).unwrap()),
    ]
}

fn field_strategy() -> impl Strategy<Value = Field> {
    grid_strategy().prop_flat_map(|g| {
        let n = g.len();
        (Just(g), 0.0f64..100.0, proptest::collection::vec(-1e6f64..1e6, n))
            .prop_map(|(g, t, v)| Field::new(g, t, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_round_trip_is_lossless(f in field_strategy(), eps in 0.1f64..5.0, theta in -2.0f64..2.0) {
        let bytes = encode_binary(&f, eps, theta).unwrap();
        let (h, g) = decode_binary(&bytes).unwrap();
        prop_assert_eq!(h.epsilon, eps);
        prop_assert_eq!(h.theta, theta);
        prop_assert_eq!(h.boundary, f.grid.boundary);
        prop_assert_eq!(&g, &f);
    }

    #[test]
    fn csv_round_trip_is_lossless(f in field_strategy()) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &f).unwrap();
        let g = read_csv(buf.as_slice(), &f.grid, f.time).unwrap();
        prop_assert_eq!(g.values, f.values);
    }

    #[test]
    fn truncated_binary_is_rejected(f in field_strategy(), cut in 0.0f64..1.0) {
        let bytes = encode_binary(&f, 1.0, 1.0).unwrap();
        let k = (bytes.len() as f64 * cut) as usize;
        prop_assert!(decode_binary(&bytes[..k]).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_binary(&bytes);
        let g = Grid::cube(1, 1.0, 4).unwrap();
        let _ = read_csv(bytes.as_slice(), &g, 0.0);
    }
}

#[test]
fn dirichlet_boundary_survives_binary() {
    let g = Grid::dirichlet(1.0, 8).unwrap();
    let f = Field::from_fn(&g, |x| x[0]);
    let (h, _) = decode_binary(&encode_binary(&f, 1.0, 0.0).unwrap()).unwrap();
    assert_eq!(h.boundary, Boundary::Dirichlet);
}
