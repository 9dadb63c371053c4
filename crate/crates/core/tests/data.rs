mod common;

use common::small_dataset;
use steinmetz::data::{
    add_complex_noise, channel_clean_output, complex_normal, dft_encode, gen_channel_dataset,
    load_cvds, measured_snr_db, save_cvds, ChannelSpec, Dataset, Domain, Labels, Meta,
};
use steinmetz::models::Task;
use steinmetz::rng::Rng;
use steinmetz::signal::{idft, ComplexVector};
use steinmetz::tensor::Tensor;
use steinmetz::Error;

fn tmp(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("steinmetz-data-{name}-{}", std::process::id()))
}

#[test]
fn complex_normal_has_unit_variance_split_evenly() {
    let mut rng = Rng::seed_from_u64(21);
    let n = 1_000_000;
    let (re, im) = complex_normal(&mut rng, n);
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    assert!((var(&re) - 0.5).abs() < 0.5 * 0.03);
    assert!((var(&im) - 0.5).abs() < 0.5 * 0.03);
    assert!(mean(&re).abs() < 5.0 / (n as f64).sqrt());
    assert!(mean(&im).abs() < 5.0 / (n as f64).sqrt());
}

#[test]
fn added_noise_has_variance_eta_squared() {
    let (m, dn) = (1000, 1000);
    let zeros = Dataset::new(
        Tensor::zeros(m, dn),
        Tensor::zeros(m, dn),
        Labels::Classes(vec![0; m]),
        Meta::new(m, dn, 1, Task::Classification, "zeros"),
    )
    .unwrap();
    for eta in [0.5, 2.0] {
        let noisy = add_complex_noise(&zeros, eta, 5).unwrap();
        let power: f64 = noisy
            .features_re
            .data()
            .iter()
            .chain(noisy.features_im.data())
            .map(|v| v * v)
            .sum::<f64>()
            / (m * dn) as f64;
        assert!(
            (power - eta * eta).abs() <= 0.03 * eta * eta,
            "eta {eta}: {power}"
        );
    }
    assert_eq!(add_complex_noise(&zeros, 0.0, 5).unwrap(), zeros);
    assert!(matches!(
        add_complex_noise(&zeros, -1.0, 5),
        Err(Error::Validation { .. })
    ));
}

#[test]
fn channel_input_variance_follows_rho() {
    let spec = ChannelSpec::default();
    let ds = gen_channel_dataset(&spec, 200_000, 3).unwrap();
    let col = |t: &Tensor| -> Vec<f64> { t.row_iter().map(|r| r[0]).collect() };
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let (vr, vi) = (var(&col(&ds.features_re)), var(&col(&ds.features_im)));
    let rho2 = spec.rho * spec.rho;
    assert!(
        (vr - (1.0 - rho2)).abs() <= 0.03 * (1.0 - rho2),
        "real variance {vr}"
    );
    assert!((vi - rho2).abs() <= 0.03 * rho2, "imaginary variance {vi}");
}

#[test]
fn channel_noise_hits_requested_snr() {
    for snr in [5.0, 12.0] {
        let spec = ChannelSpec {
            snr_db: snr,
            ..ChannelSpec::default()
        };
        let ds = gen_channel_dataset(&spec, 1000, 8).unwrap();
        let clean = channel_clean_output(&spec, &ds);
        let Labels::Complex(t) = &ds.labels else {
            panic!("regression labels")
        };
        let noisy: Vec<(f64, f64)> = t.row_iter().map(|r| (r[0], r[1])).collect();
        let measured = measured_snr_db(&clean, &noisy);
        assert!((measured - snr).abs() <= 0.1, "{measured} dB");
    }
}

#[test]
fn channel_generation_is_deterministic() {
    let spec = ChannelSpec::default();
    let a = gen_channel_dataset(&spec, 50, 4).unwrap();
    assert_eq!(a, gen_channel_dataset(&spec, 50, 4).unwrap());
    assert_ne!(a, gen_channel_dataset(&spec, 50, 5).unwrap());
}

#[test]
fn channel_rows_are_sliding_windows() {
    let ds = gen_channel_dataset(&ChannelSpec::default(), 20, 1).unwrap();
    for i in 1..20 {
        assert_eq!(ds.features_re.row(i)[1..], ds.features_re.row(i - 1)[..4]);
        assert_eq!(ds.features_im.row(i)[1..], ds.features_im.row(i - 1)[..4]);
    }
}

fn real_dataset(m: usize, dn: usize) -> Dataset {
    let mut rng = Rng::seed_from_u64(12);
    let re = Tensor::matrix(m, dn, (0..m * dn).map(|_| rng.uniform()).collect()).unwrap();
    let mut meta = Meta::new(m, dn, 3, Task::Classification, "real");
    meta.domain = Domain::Real;
    Dataset::new(re, Tensor::zeros(m, dn), Labels::Classes(vec![1; m]), meta).unwrap()
}

#[test]
fn dft_encoding_is_conjugate_symmetric_and_invertible() {
    let raw = real_dataset(4, 12);
    let enc = dft_encode(&raw).unwrap();
    assert_eq!(enc.meta.domain, Domain::Complex);
    for i in 0..4 {
        let (re, im) = (enc.features_re.row(i), enc.features_im.row(i));
        for b in 1..12 {
            assert!((re[b] - re[12 - b]).abs() < 1e-12);
            assert!((im[b] + im[12 - b]).abs() < 1e-12);
        }
        let back = idft(&ComplexVector::new(re.to_vec(), im.to_vec()).unwrap());
        for (a, b) in back.re.iter().zip(raw.features_re.row(i)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(back.im.iter().all(|v| v.abs() < 1e-12));
    }
    assert!(dft_encode(&enc).is_err(), "complex input must be rejected");
}

#[test]
fn cvds_round_trip_preserves_every_field() {
    for (name, ds) in [
        ("cls", small_dataset(Task::Classification, 7, 5, 3, 1)),
        ("reg", small_dataset(Task::ComplexRegression, 7, 5, 2, 2)),
        ("real", real_dataset(6, 8)),
    ] {
        let dir = tmp(name);
        save_cvds(&ds, &dir).unwrap();
        assert_eq!(load_cvds(&dir).unwrap(), ds, "{name}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

#[test]
fn cvds_blobs_are_little_endian_f64() {
    let ds = small_dataset(Task::Classification, 2, 3, 2, 4);
    let dir = tmp("endian");
    save_cvds(&ds, &dir).unwrap();
    let bytes = std::fs::read(dir.join("features_re.bin")).unwrap();
    let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
    assert_eq!(first, ds.features_re.data()[0]);
    assert_eq!(bytes.len(), 6 * 8);
    let labels = std::fs::read(dir.join("labels.bin")).unwrap();
    assert_eq!(labels.len(), 2 * 4);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn corrupt_cvds_is_a_data_error() {
    let ds = small_dataset(Task::Classification, 4, 3, 2, 6);

    let dir = tmp("trunc");
    save_cvds(&ds, &dir).unwrap();
    let path = dir.join("features_im.bin");
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = load_cvds(&dir).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    std::fs::remove_dir_all(&dir).unwrap();

    let dir = tmp("nan");
    save_cvds(&ds, &dir).unwrap();
    let path = dir.join("features_re.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[8..16].copy_from_slice(&f64::NAN.to_le_bytes());
    std::fs::write(&path, bytes).unwrap();
    let err = load_cvds(&dir).unwrap_err();
    assert!(err.to_string().contains("features_re"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();

    let err = load_cvds(&tmp("missing")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
