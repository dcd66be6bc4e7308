use ceskd::config::PolicyName;
use ceskd::container::{
    checkpoint, load_checkpoint, load_checkpoint_for, load_dataset, model_from, save_checkpoint, save_dataset, Container,
};
use ceskd::curriculum_file::CurriculumFile;
use ceskd::loaders::{load_cifar10_bin, load_idx, parse_cifar10, parse_idx_images, parse_idx_labels, CIFAR_RECORD};
use ceskd::Error;
use ceskd_core::curriculum::{rank, ScoredSample};
use ceskd_core::data::{gen_synthetic, Split, SyntheticConfig};
use ceskd_core::nn::{init_weights, LayerSpec, Model, ModelSpec};
use proptest::prelude::*;

fn conv_spec(tag: u32) -> ModelSpec {
    ModelSpec::new(
        vec![1, 4, 4],
        vec![
            LayerSpec::Conv2d { in_channels: 1, out_channels: 2, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { kernel: 2, stride: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { in_features: 8, out_features: 3 },
        ],
        tag,
    )
    .unwrap()
}

fn model(seed: u64) -> Model<f32> {
    init_weights(&conv_spec(6), seed).unwrap()
}

#[test]
fn checkpoint_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let m = model(3);
    save_checkpoint(&m, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.spec(), m.spec());
    assert_eq!(back.seed(), 3);
    for (a, b) in back.params().iter().zip(m.params()) {
        let bits = |t: &ceskd_core::Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(checkpoint(&back).to_bytes(), bytes);
    let text = String::from_utf8_lossy(&bytes[..200]).to_string();
    assert!(text.starts_with("ceskd-container 1\nkind checkpoint\ndepth_tag 6\nseed 3\ninput_shape 1 4 4\nlayer conv2d 1 2 3 1 1\n"));
}

#[test]
fn flipped_payload_byte_is_detected() {
    let bytes = checkpoint(&model(1)).to_bytes();
    let payload_start = bytes.windows(4).position(|w| w == b"end\n").unwrap() + 4;
    for at in [payload_start, payload_start + 17, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x01;
        let err = Container::from_bytes(&bad, "m.ckpt").unwrap_err();
        assert!(matches!(err, Error::Checksum { .. }), "{err}");
    }
}

#[test]
fn damaged_headers_are_typed_errors() {
    let bytes = checkpoint(&model(1)).to_bytes();
    let swap = |from: &str, to: &str| {
        let text = String::from_utf8_lossy(&bytes).into_owned();
        assert!(text.contains(from));
        let end = bytes.windows(4).position(|w| w == b"end\n").unwrap() + 4;
        let head = std::str::from_utf8(&bytes[..end]).unwrap().replacen(from, to, 1);
        let mut out = head.into_bytes();
        out.extend_from_slice(&bytes[end..]);
        out
    };
    let v2 = Container::from_bytes(&swap("ceskd-container 1", "ceskd-container 2"), "m").unwrap_err();
    assert!(matches!(v2, Error::Version { found: 2, expected: 1, .. }), "{v2}");
    let magic = Container::from_bytes(&swap("ceskd-container", "other-container"), "m").unwrap_err();
    assert!(matches!(magic, Error::Parse { offset: 0, .. }), "{magic}");
    let shape = Container::from_bytes(&swap("tensor 2 1 3 3", "tensor 2 1 3 4"), "m").unwrap_err();
    assert!(matches!(shape, Error::Parse { .. }), "{shape}");
    let layer = model_from(Container::from_bytes(&swap("layer relu", "layer gelu"), "m").unwrap(), "m").unwrap_err();
    assert!(layer.to_string().contains("gelu"), "{layer}");
    let truncated = Container::from_bytes(&bytes[..bytes.len() - 4], "m").unwrap_err();
    assert!(truncated.to_string().contains("payload"), "{truncated}");
    let cut_header = Container::from_bytes(&bytes[..30], "m").unwrap_err();
    assert!(matches!(cut_header, Error::Parse { .. }), "{cut_header}");
}

#[test]
fn depth_tag_must_match_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model(1), &path).unwrap();
    assert!(load_checkpoint_for(&path, &conv_spec(6)).is_ok());
    let err = load_checkpoint_for(&path, &conv_spec(8)).unwrap_err();
    assert!(matches!(err, Error::DepthMismatch { expected: 8, found: 6, .. }), "{err}");
    let other = ModelSpec::mlp(16, &[4], 3, 6).unwrap();
    assert!(load_checkpoint_for(&path, &other).is_err());
}

#[test]
fn datasets_use_the_same_container() {
    let dir = tempfile::tempdir().unwrap();
    let splits = gen_synthetic(&SyntheticConfig {
        classes: 4,
        dim: 5,
        n_train: 40,
        n_test: 12,
        hardness: 0.5,
        seed: 2,
    })
    .unwrap();
    for ds in [&splits.train, &splits.test] {
        let path = dir.path().join("d.bin");
        save_dataset(ds, &path).unwrap();
        assert_eq!(&load_dataset(&path).unwrap(), ds);
    }
    let mut c = ceskd::container::dataset(&splits.train);
    c.tensors[1].data_mut()[0] = 7.0;
    let bytes = c.to_bytes();
    let err = ceskd::container::dataset_from(Container::from_bytes(&bytes, "d").unwrap(), "d").unwrap_err();
    assert!(err.to_string().contains("label 7"), "{err}");
    assert!(model_from(Container::from_bytes(&bytes, "d").unwrap(), "d").is_err());
}

proptest! {
    #[test]
    fn any_mlp_round_trips(
        input in 1usize..6,
        hidden in prop::collection::vec(1usize..7, 0..3),
        classes in 2usize..5,
        tag in 0u32..100,
        seed in any::<u64>(),
    ) {
        let spec = ModelSpec::mlp(input, &hidden, classes, tag).unwrap();
        let m: Model<f32> = init_weights(&spec, seed).unwrap();
        let bytes = checkpoint(&m).to_bytes();
        let back = model_from(Container::from_bytes(&bytes, "p").unwrap(), "p").unwrap();
        prop_assert_eq!(back.checksum(), m.checksum());
        prop_assert_eq!(back.seed(), seed);
        prop_assert_eq!(checkpoint(&back).to_bytes(), bytes);
    }
}

fn curriculum() -> CurriculumFile {
    let scored: Vec<ScoredSample> = (0..23)
        .map(|i| ScoredSample {
            index: i,
            label: i % 3,
            // ties, tiny and large magnitudes
            score: match i % 5 {
                0 => 0.1 + 0.2,
                1 => 1e-300,
                2 => (i as f64).sqrt() * 1e10,
                _ => 1.0 / (i as f64 + 1.0),
            },
        })
        .collect();
    CurriculumFile::new(rank(&scored), 3, true, PolicyName::Anti, 42, "ab".repeat(32)).unwrap()
}

#[test]
fn curriculum_file_round_trips_exactly() {
    let cur = curriculum();
    let text = cur.to_text();
    let back = CurriculumFile::parse(&text, "c.tsv").unwrap();
    assert_eq!(back, cur);
    assert_eq!(back.to_text(), text);
    assert!(text.starts_with("# ceskd curriculum 1\n# buckets 3\n# class_balanced true\n# policy anti\n# seed 42\n# scorer abab"));
    let dir = tempfile::tempdir().unwrap();
    cur.save(&dir.path().join("c.tsv")).unwrap();
    assert_eq!(CurriculumFile::load(&dir.path().join("c.tsv")).unwrap(), cur);
}

#[test]
fn damaged_curriculum_files_name_the_line() {
    let text = curriculum().to_text();
    let lines: Vec<&str> = text.lines().collect();
    let with_line = |no: usize, replacement: &str| {
        let mut l = lines.clone();
        l[no - 1] = replacement;
        l.join("\n") + "\n"
    };
    let line_of = |e: Error| match e {
        Error::Parse { unit: "line", offset, .. } => offset,
        other => panic!("{other}"),
    };
    // row 8 is the first sample: move it to the wrong bucket
    let cols: Vec<&str> = lines[7].split('\t').collect();
    let moved = format!("{}\t{}\t{}\t2", cols[0], cols[1], cols[2]);
    assert_eq!(line_of(CurriculumFile::parse(&with_line(8, &moved), "c").unwrap_err()), 8);
    assert_eq!(line_of(CurriculumFile::parse(&with_line(9, "1\t2\tx\t0"), "c").unwrap_err()), 9);
    assert_eq!(line_of(CurriculumFile::parse(&with_line(9, "1\t2\t0.5"), "c").unwrap_err()), 9);
    assert_eq!(line_of(CurriculumFile::parse(&with_line(4, "# policy greedy"), "c").unwrap_err()), 4);
    assert_eq!(line_of(CurriculumFile::parse(&with_line(7, "index\tlabel"), "c").unwrap_err()), 7);
    let v = CurriculumFile::parse(&with_line(1, "# ceskd curriculum 9"), "c").unwrap_err();
    assert!(matches!(v, Error::Version { found: 9, .. }), "{v}");
    // swapping two rows breaks the ranking
    let mut l = lines.clone();
    l.swap(8, 20);
    assert!(CurriculumFile::parse(&(l.join("\n") + "\n"), "c").is_err());
    // a missing row
    let mut l = lines.clone();
    l.remove(12);
    assert!(CurriculumFile::parse(&(l.join("\n") + "\n"), "c").is_err());
}

fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x803u32, n, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x801u32, labels.len() as u32] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(labels);
    b
}

#[test]
fn idx_fixture_recovers_exact_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    std::fs::write(&img, idx_images(2, 2, 2, &[0, 255, 51, 102, 1, 2, 3, 254])).unwrap();
    std::fs::write(&lbl, idx_labels(&[3, 7])).unwrap();
    let ds = load_idx(&img, &lbl, Split::Train).unwrap();
    assert_eq!(ds.features().shape(), &[2, 1, 2, 2]);
    assert_eq!(ds.labels(), &[3, 7]);
    assert_eq!(ds.num_classes(), 10);
    let expected: Vec<f32> = [0u8, 255, 51, 102, 1, 2, 3, 254].iter().map(|&b| b as f32 / 255.0).collect();
    assert_eq!(ds.features().data(), expected.as_slice());
    assert_eq!(ds.features().data()[1], 1.0);
    assert_eq!(ds.features().data()[2], 0.2);
}

#[test]
fn malformed_idx_files_report_offsets() {
    let good = idx_images(2, 2, 2, &[0; 8]);
    let err = parse_idx_images(&good[..good.len() - 3], "img").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("expected 24 bytes, found 21"), "{msg}");
    assert!(matches!(err, Error::Parse { offset: 21, .. }));
    let mut magic = good.clone();
    magic[3] = 0x01;
    let err = parse_idx_images(&magic, "img").unwrap_err();
    assert!(matches!(err, Error::Parse { offset: 0, .. }), "{err}");
    assert!(err.to_string().contains("0x00000801"), "{err}");
    assert!(parse_idx_images(&good[..10], "img").is_err());
    let mut extra = good.clone();
    extra.push(0);
    assert!(parse_idx_images(&extra, "img").unwrap_err().to_string().contains("trailing"));
    assert!(parse_idx_labels(&good, "lbl").is_err());

    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    std::fs::write(&img, &good).unwrap();
    std::fs::write(&lbl, idx_labels(&[1, 2, 3])).unwrap();
    let err = load_idx(&img, &lbl, Split::Train).unwrap_err();
    assert!(err.to_string().contains("3 labels for 2 images"), "{err}");
    assert!(load_idx(&dir.path().join("nope"), &lbl, Split::Train).is_err());
}

#[test]
fn standard_size_idx_file_spot_checks() {
    // 1000 images of 28x28 with pixel (i, r, c) = (7i + 3r + 5c) mod 256
    let (n, side) = (1000usize, 28usize);
    let mut pixels = Vec::with_capacity(n * side * side);
    for i in 0..n {
        for r in 0..side {
            for c in 0..side {
                pixels.push(((7 * i + 3 * r + 5 * c) % 256) as u8);
            }
        }
    }
    let bytes = idx_images(n as u32, 28, 28, &pixels);
    let (count, rows, cols, data) = parse_idx_images(&bytes, "big").unwrap();
    assert_eq!((count, rows, cols), (n, 28, 28));
    // hex dump: byte at 16 + 784*i + 28*r + c
    for (i, r, c) in [(0, 0, 0), (1, 2, 3), (999, 27, 27), (500, 14, 9)] {
        let at = 16 + 784 * i + 28 * r + c;
        assert_eq!(data[784 * i + 28 * r + c], bytes[at] as f32 / 255.0);
        assert_eq!(bytes[at] as usize, (7 * i + 3 * r + 5 * c) % 256);
    }
}

fn cifar_record(label: u8, fill: impl Fn(usize) -> u8) -> Vec<u8> {
    let mut r = vec![label];
    r.extend((0..CIFAR_RECORD - 1).map(fill));
    r
}

#[test]
fn cifar_fixture_recovers_labels_and_planes() {
    let mut bytes = cifar_record(4, |i| (i % 256) as u8);
    bytes.extend(cifar_record(9, |i| if i < 1024 { 255 } else { 0 }));
    let (pixels, labels) = parse_cifar10(&bytes, "c").unwrap();
    assert_eq!(labels, vec![4, 9]);
    assert_eq!(pixels.len(), 2 * 3072);
    assert_eq!(pixels[300], 44.0 / 255.0);
    // second record: red plane full, green and blue empty
    assert!(pixels[3072..3072 + 1024].iter().all(|&v| v == 1.0));
    assert!(pixels[3072 + 1024..].iter().all(|&v| v == 0.0));

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    std::fs::write(&a, &bytes).unwrap();
    std::fs::write(&b, cifar_record(0, |_| 7)).unwrap();
    let ds = load_cifar10_bin(&[a, b], Split::Test).unwrap();
    assert_eq!(ds.features().shape(), &[3, 3, 32, 32]);
    assert_eq!(ds.labels(), &[4, 9, 0]);
}

#[test]
fn cifar_batch_size_follows_file_length() {
    let bytes: Vec<u8> = (0..10_000).flat_map(|i| cifar_record((i % 10) as u8, |j| ((i + j) % 256) as u8)).collect();
    let (_, labels) = parse_cifar10(&bytes, "batch").unwrap();
    assert_eq!(labels.len(), bytes.len() / 3073);
    assert_eq!(labels.len(), 10_000);
}

#[test]
fn malformed_cifar_files_are_errors() {
    let mut bytes = cifar_record(1, |_| 0);
    bytes.extend(cifar_record(10, |_| 0));
    let err = parse_cifar10(&bytes, "c").unwrap_err();
    assert!(matches!(err, Error::Parse { offset: 3073, .. }), "{err}");
    let err = parse_cifar10(&bytes[..5000], "c").unwrap_err();
    assert!(err.to_string().contains("not a multiple"), "{err}");
    assert!(matches!(err, Error::Parse { offset: 3073, .. }));
}
