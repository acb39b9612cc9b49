use std::fs;

use smectic_core::energy::ModelParams;
use smectic_core::fields::{GridFunction, PeriodicGrid};
use smectic_core::harness::standard_initial_state;
use smectic_core::io::{read_snapshot, write_snapshot};
use smectic_core::sampling::{random_q, random_scalar, rng};
use smectic_core::stepper::SimState;
use smectic_core::Error;

fn random_state(d: usize, n: usize, seed: u64) -> (SimState, ModelParams) {
    let p = ModelParams { dim: d, nem_b: if d == 3 { 0.5 } else { 0.0 }, ..Default::default() };
    let g = PeriodicGrid::periodic_box(d, n).unwrap();
    let mut r = rng(seed);
    let q = random_q(&mut r, g, 0.6);
    let u = random_scalar(&mut r, g, 0.3);
    (SimState::at(q, u, -1.25, 0.375, 12, &p).unwrap(), p)
}

#[test]
fn round_trip_is_bit_exact() {
    for (d, n) in [(2, 16), (3, 6)] {
        let dir = tempfile::tempdir().unwrap();
        let (s, p) = random_state(d, n, 3);
        let path = write_snapshot(dir.path(), "snap", &s, 99).unwrap();
        let snap = read_snapshot(&path).unwrap();
        assert_eq!(snap.header.seed, 99);
        assert_eq!(snap.header.step, 12);
        assert_eq!(snap.header.components.len(), if d == 2 { 3 } else { 6 });
        let back = snap.into_state(&p).unwrap();
        assert_eq!(back.s(), s.s());
        assert_eq!(back.t(), s.t());
        assert_eq!(back.step(), s.step());
        assert_eq!(back.u().data, s.u().data);
        for (a, b) in back.q().components().iter().zip(s.q().components()) {
            assert_eq!(a.data, b.data);
        }
    }
}

#[test]
fn raw_files_are_row_major_little_endian() {
    let dir = tempfile::tempdir().unwrap();
    let p = ModelParams::default();
    let g = PeriodicGrid::periodic_box(2, 8).unwrap();
    let s = standard_initial_state(g, &p).unwrap();
    write_snapshot(dir.path(), "s", &s, 0).unwrap();
    let bytes = fs::read(dir.path().join("s.u.f64")).unwrap();
    assert_eq!(bytes.len(), 64 * 8);
    // node (i, j) sits at i * J + j; u depends on x only
    let at = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    assert_eq!(at(8 + 3), s.u().data[g.index(&[1, 3])]);
    assert_eq!(at(8), at(8 + 5));
    assert_eq!(at(8), 0.25 * (5.0 * g.spacing()).cos());
}

#[test]
fn damaged_snapshots_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (s, _) = random_state(2, 8, 1);
    let path = write_snapshot(dir.path(), "snap", &s, 0).unwrap();
    let u = dir.path().join("snap.u.f64");
    let bytes = fs::read(&u).unwrap();
    fs::write(&u, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(read_snapshot(&path), Err(Error::Snapshot(_))));

    let header = fs::read_to_string(&path).unwrap().replace("\"Q12\"", "\"Q13\"");
    fs::write(&path, header).unwrap();
    assert!(matches!(read_snapshot(&path), Err(Error::Snapshot(_))));

    // dimension mismatch with the parameters
    let path = write_snapshot(dir.path(), "ok", &s, 0).unwrap();
    let p3 = ModelParams { dim: 3, ..Default::default() };
    assert!(read_snapshot(&path).unwrap().into_state(&p3).is_err());
}
