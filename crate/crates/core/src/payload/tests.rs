use proptest::prelude::*;

use super::synth::{f32_file, pgm, synthetic_file, wav};
use super::*;

#[test]
fn pgm_bit_count() {
    let file = pgm(8, 8, &[7u8; 64]);
    let (bits, meta) = encode_payload(&file, Modality::Image).unwrap();
    assert_eq!(bits.len(), 512);
    assert_eq!(meta.body_len(), 64);
    assert_eq!(decode_payload(&bits, &meta).unwrap(), file);
}

#[test]
fn pnm_header_with_comment_and_ppm() {
    let mut file = b"P6\n# made by hand\n2 1\n255\n".to_vec();
    file.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
    let frame = PayloadFrame::parse(&file, Modality::Image).unwrap();
    assert_eq!(frame.raw_bytes, vec![1, 2, 3, 4, 5, 6]);
    assert!(matches!(frame.meta, PayloadMeta::Image { width: 2, height: 1, channels: 3, .. }));
}

#[test]
fn pnm_errors_name_offsets() {
    assert!(matches!(PayloadFrame::parse(b"P2\n1 1\n255\n\0", Modality::Image), Err(Error::Format { offset: 0, .. })));
    // Truncated body: header is 11 bytes, 3 of 4 pixels present.
    let err = PayloadFrame::parse(b"P5\n2 2\n255\n\0\0\0", Modality::Image).unwrap_err();
    assert!(matches!(err, Error::Format { offset: 14, .. }), "{err}");
    let err = PayloadFrame::parse(b"P5\n2 x\n255\n", Modality::Image).unwrap_err();
    assert!(matches!(err, Error::Format { offset: 5, .. }), "{err}");
    assert!(PayloadFrame::parse(b"P5\n1 1\n65535\n\0\0", Modality::Image).is_err());
}

#[test]
fn gps_fixed_point_encoding() {
    let file = b"48.8566000,2.3522000\n";
    let (bits, meta) = encode_payload(file, Modality::Gps).unwrap();
    assert_eq!(bits.len(), 64);
    let body = bits_to_bytes(&bits).unwrap();
    assert_eq!(&body[..4], &488_566_000i32.to_be_bytes());
    assert_eq!(&body[4..], &23_522_000i32.to_be_bytes());
    assert_eq!(decode_payload(&bits, &meta).unwrap(), file);
}

#[test]
fn gps_canonicalises_and_rejects() {
    let (bits, meta) = encode_payload(b"-33.9,18.42\r\n\n", Modality::Gps).unwrap();
    assert_eq!(decode_payload(&bits, &meta).unwrap(), b"-33.9000000,18.4200000\n");
    assert!(matches!(encode_payload(b"1,2\n91,0\n", Modality::Gps), Err(Error::Format { offset: 4, .. })));
    assert!(matches!(encode_payload(b"12.5\n", Modality::Gps), Err(Error::Format { offset: 0, .. })));
}

#[test]
fn gps_low_bit_flip_is_local() {
    let file = b"48.8566000,2.3522000\n";
    let (mut bits, meta) = encode_payload(file, Modality::Gps).unwrap();
    bits[31] ^= 1;
    bits[63] ^= 1;
    let rec = decode_payload(&bits, &meta).unwrap();
    let err = payload_metric(file, &rec, &meta).unwrap();
    assert!(err > 0.0 && err < 1e-3);
}

#[test]
fn gps_out_of_range_is_clamped() {
    let (mut bits, meta) = encode_payload(b"10.0,20.0\n", Modality::Gps).unwrap();
    bits[1] = 1; // lat sign-adjacent bit: value far above 90 degrees
    let rec = decode_payload(&bits, &meta).unwrap();
    assert!(String::from_utf8(rec).unwrap().starts_with("90.0000000,"));
}

#[test]
fn lidar_bit_count_and_nan_policy() {
    let pts: Vec<f32> = (0..300).map(|i| i as f32 * 0.25).collect();
    let file = f32_file(&pts);
    let (mut bits, meta) = encode_payload(&file, Modality::Lidar).unwrap();
    assert_eq!(bits.len(), 9600);
    assert_eq!(meta, PayloadMeta::Lidar { points: 100 });
    // Turn the first value into a NaN pattern (0x7fc00000), MSB-first per byte.
    let nan = bytes_to_bits(&f32::NAN.to_le_bytes());
    bits[..32].copy_from_slice(&nan);
    let rec = decode_payload(&bits, &meta).unwrap();
    assert_eq!(&rec[..4], &0f32.to_le_bytes());
    assert_eq!(&rec[4..], &file[4..]);
}

#[test]
fn float_files_reject_partial_records() {
    assert!(matches!(PayloadFrame::parse(&[0u8; 13], Modality::Lidar), Err(Error::Format { offset: 12, .. })));
    assert!(matches!(PayloadFrame::parse(&[0u8; 12], Modality::Radar), Err(Error::Format { offset: 8, .. })));
    let bad = f32_file(&[1.0, f32::INFINITY, 0.0]);
    assert!(matches!(PayloadFrame::parse(&bad, Modality::Lidar), Err(Error::Format { offset: 4, .. })));
}

#[test]
fn wav_roundtrip_and_errors() {
    let file = wav(16_000, &[0, 1, -1, i16::MAX, i16::MIN]);
    let (bits, meta) = encode_payload(&file, Modality::Audio).unwrap();
    assert_eq!(bits.len(), 80);
    assert_eq!(decode_payload(&bits, &meta).unwrap(), file);
    let frame = PayloadFrame::parse(&file, Modality::Audio).unwrap();
    assert_eq!(frame.samples()[3..], [32767.0 / 32768.0, -1.0]);

    let mut stereo = file.clone();
    stereo[22] = 2;
    assert!(matches!(PayloadFrame::parse(&stereo, Modality::Audio), Err(Error::Format { offset: 22, .. })));
    assert!(matches!(PayloadFrame::parse(&file[..40], Modality::Audio), Err(Error::Format { .. })));
    assert!(matches!(PayloadFrame::parse(&file[..50], Modality::Audio), Err(Error::Format { offset: 4, .. })));
}

#[test]
fn decode_checks_bit_count() {
    let (bits, meta) = encode_payload(&synthetic_file(Modality::Radar, 0), Modality::Radar).unwrap();
    assert!(matches!(decode_payload(&bits[1..], &meta), Err(Error::Framing(_))));
}

#[test]
fn synthetic_files_roundtrip() {
    for m in Modality::ALL {
        let file = synthetic_file(m, 3);
        let (bits, meta) = encode_payload(&file, m).unwrap();
        let rec = decode_payload(&bits, &meta).unwrap();
        assert_eq!(rec, file, "{m}");
        assert_eq!(payload_metric(&file, &rec, &meta).unwrap(), m.metric().sentinel());
    }
}

#[test]
fn segmentation_examples() {
    let t = frame_segment(&vec![1u8; 9216], 512).unwrap();
    assert_eq!((t.blocks.len(), t.pad_bits), (18, 0));
    let t = frame_segment(&[1u8; 10], 512).unwrap();
    assert_eq!((t.blocks.len(), t.pad_bits), (1, 502));
    assert!(t.blocks[0][10..].iter().all(|&b| b == 0));
    assert!(frame_segment(&[1], 0).is_err());
    assert!(frame_reassemble(&t.blocks, 513).is_err());
}

#[test]
fn segmentation_inverse_on_many_payloads() {
    use rand::Rng;
    let mut rng = crate::rng::rng_from(8);
    for _ in 0..1000 {
        let n = rng.random_range(0..3000);
        let k = rng.random_range(1..700);
        let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let t = frame_segment(&bits, k).unwrap();
        assert!(t.blocks.iter().all(|b| b.len() == k));
        assert_eq!(t.blocks.len() * k, n + t.pad_bits);
        assert_eq!(frame_reassemble(&t.blocks, t.pad_bits).unwrap(), bits);
    }
}

proptest! {
    #[test]
    fn bits_bytes_inverse(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        prop_assert_eq!(bits_to_bytes(&bytes_to_bits(&bytes)).unwrap(), bytes);
    }
}

#[test]
fn metric_reference_values() {
    let a = vec![100.0; 16];
    let b = vec![105.0; 16];
    let p = psnr(&a, &b, 255.0).unwrap();
    assert!((p - 10.0 * (255.0f64 * 255.0 / 25.0).log10()).abs() < 1e-12);
    assert!((p - 34.151).abs() < 1e-3);
    assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
    assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-12);
    assert_eq!(mse(&a, &a).unwrap(), 0.0);
    assert!(matches!(mse(&a, &b[1..]), Err(Error::Metric(_))));
}

#[test]
fn modality_names() {
    for m in Modality::ALL {
        assert_eq!(m.name().parse::<Modality>().unwrap(), m);
    }
    assert!("video".parse::<Modality>().is_err());
    assert_eq!(Modality::Gps.metric().name(), "rmse");
    assert_eq!(Modality::Image.metric().name(), "psnr");
}
