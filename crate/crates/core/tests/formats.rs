use dro_core::cloud::{Labels, PointCloud};
use dro_core::io::{decode_cloud, decode_matrix, encode_cloud, encode_matrix, Dtype, StoredMatrix};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng) -> PointCloud {
    let n = rng.random_range(0..300);
    let points = (0..n)
        .map(|_| Point3::new(rng.random_range(-1e3..1e3), rng.random::<f64>(), -rng.random::<f64>() * 1e-9))
        .collect();
    let labels = rng.random_bool(0.5).then(|| {
        let names: Vec<String> = (0..rng.random_range(1..8)).map(|i| format!("link_{i}\"é")).collect();
        Labels {
            ids: (0..n).map(|_| rng.random_range(0..names.len() as u32)).collect(),
            names,
        }
    });
    PointCloud { points, labels }
}

#[test]
fn clouds_round_trip_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let c = random_cloud(&mut rng);
        let bytes = encode_cloud(&c).unwrap();
        let back = decode_cloud(&bytes).unwrap();
        assert_eq!(back.labels, c.labels);
        for (a, b) in back.points.iter().zip(&c.points) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
        assert_eq!(encode_cloud(&back).unwrap(), bytes);
    }
}

#[test]
fn matrices_round_trip_bitwise_in_both_dtypes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..100 {
        let (rows, cols) = (rng.random_range(0..50), rng.random_range(0..50));
        let values: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..2.0)).collect();
        let m = StoredMatrix { rows, cols, dtype: Dtype::F64, values: values.clone() };
        let bytes = encode_matrix(&m).unwrap();
        assert_eq!(bytes.len(), 19 + rows * cols * 8);
        let back = decode_matrix(&bytes).unwrap();
        assert!(back.values.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()), "instance {k}");

        let f = StoredMatrix { dtype: Dtype::F32, ..m };
        let bytes = encode_matrix(&f).unwrap();
        assert_eq!(bytes.len(), 19 + rows * cols * 4);
        let back = decode_matrix(&bytes).unwrap();
        assert_eq!(back.dtype, Dtype::F32);
        for (a, b) in back.values.iter().zip(&values) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
        assert_eq!(encode_matrix(&back).unwrap(), bytes);
    }
}
