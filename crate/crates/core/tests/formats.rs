use flakelayer::multiscatter::{load_weights, mlp_infer, save_weights, MlpWeights};
use flakelayer::oracle::{tabulate, BsdfTable, DirectionGrid, TabulateConfig, WalkMode};
use flakelayer::{parse_material, serialize_material, Error, LayerSpec, LayerStack};

fn table() -> BsdfTable {
    let s = LayerStack::single(LayerSpec::isotropic(0.9, 1.0)).unwrap();
    let text = serialize_material(&s);
    tabulate(&s, text, &TabulateConfig::new(DirectionGrid::new(3, 5), 500, WalkMode::MultipleOnly, 1))
}

#[test]
fn table_file_round_trip() {
    let t = table();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.sptb");
    t.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back = BsdfTable::read_from(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());
    // the echoed material re-parses to the tabulated stack
    let s = parse_material(&back.material).unwrap();
    assert_eq!(s.len(), 1);
}

#[test]
fn table_header_layout() {
    let t = table();
    let b = t.to_bytes();
    assert_eq!(&b[..4], b"SPTB");
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
    assert_eq!(b[8], WalkMode::MultipleOnly.tag());
    assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(b[13..17].try_into().unwrap()), 5);
    assert_eq!(b[17], 0);
    assert_eq!(u64::from_le_bytes(b[18..26].try_into().unwrap()), 500);
    let len = u32::from_le_bytes(b[26..30].try_into().unwrap()) as usize;
    assert_eq!(&b[30..30 + len], t.material.as_bytes());
    assert_eq!(b.len(), 30 + len + t.values.len() * 4);
}

#[test]
fn corrupt_tables_are_rejected() {
    let b = table().to_bytes();
    assert!(matches!(BsdfTable::from_bytes(&b[..b.len() - 2]), Err(Error::Truncated { .. })));
    let mut bad = b.clone();
    bad[0] = b'X';
    assert!(matches!(BsdfTable::from_bytes(&bad), Err(Error::BadMagic { .. })));
    let mut nan = b.clone();
    let n = nan.len();
    nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(BsdfTable::from_bytes(&nan).is_err());
    let mut neg = b;
    neg[n - 4..].copy_from_slice(&(-1.0f32).to_le_bytes());
    assert!(BsdfTable::from_bytes(&neg).is_err());
}

#[test]
fn weight_file_round_trip() {
    let mut w = MlpWeights::zeros(1, &[128, 128, 128], false);
    for (i, v) in w.layers[0].weights.iter_mut().enumerate() {
        *v = (i as f32 * 0.37).sin() * 0.1;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.spck");
    save_weights(&w, &path).unwrap();
    let back = load_weights(&path).unwrap();
    assert_eq!(back, w);
    let s = LayerStack::single(LayerSpec::isotropic(0.5, 2.0)).unwrap();
    assert_eq!(mlp_infer(&back, &s).unwrap(), mlp_infer(&w, &s).unwrap());
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_weights(&path), Err(Error::Truncated { .. })));
    assert!(matches!(load_weights(dir.path().join("missing")), Err(Error::Io(_))));
}
