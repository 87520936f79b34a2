//! `NFSN` v1 snapshot files.
//!
//! All fields little-endian:
//!
//! ```text
//! magic      4 bytes  "NFSN"
//! version    u32      1
//! M          u32      element count
//! T          u32      snapshot count
//! lambda     f64      wavelength, meters
//! kind       u8       0 = ULA, 1 = UPA
//! geometry            ULA: u32 elements, f64 spacing
//!                     UPA: u32 mx, u32 my, f64 spacing
//! model      u8       0 = exact, 1 = Fresnel
//! has_truth  u8       0 or 1
//! truth               if has_truth: u32 count, then per source
//!                     f64 phi (rad), u8 has_psi, f64 psi (rad, 0 if absent), f64 range (m)
//! data       M·T pairs of f64 (re, im), snapshot-major: t outer, m inner
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::channel::SnapshotMatrix;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayKind, ArrayResponse, PhaseModel, SourceLocation};
use crate::{CMatrix, C64};

pub const MAGIC: &[u8; 4] = b"NFSN";
pub const VERSION: u32 = 1;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Serializes a snapshot matrix.
pub fn write_snapshots(mut w: impl Write, snap: &SnapshotMatrix) -> std::io::Result<()> {
    let resp = &snap.response;
    let g = resp.geometry();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(snap.elements() as u32).to_le_bytes())?;
    w.write_all(&(snap.snapshots() as u32).to_le_bytes())?;
    w.write_all(&resp.lambda().to_le_bytes())?;
    match g.kind() {
        ArrayKind::Ula { elements } => {
            w.write_all(&[0])?;
            w.write_all(&(elements as u32).to_le_bytes())?;
        }
        ArrayKind::Upa { mx, my } => {
            w.write_all(&[1])?;
            w.write_all(&(mx as u32).to_le_bytes())?;
            w.write_all(&(my as u32).to_le_bytes())?;
        }
    }
    w.write_all(&g.spacing().to_le_bytes())?;
    w.write_all(&[match resp.model() {
        PhaseModel::Exact => 0,
        PhaseModel::Fresnel => 1,
    }])?;
    match &snap.truth {
        None => w.write_all(&[0])?,
        Some(truth) => {
            w.write_all(&[1])?;
            w.write_all(&(truth.len() as u32).to_le_bytes())?;
            for loc in truth {
                w.write_all(&loc.phi.to_le_bytes())?;
                w.write_all(&[loc.psi.is_some() as u8])?;
                w.write_all(&loc.psi.unwrap_or(0.0).to_le_bytes())?;
                w.write_all(&loc.range.to_le_bytes())?;
            }
        }
    }
    // Column-major storage is already t-outer, m-inner.
    for z in snap.data.as_slice() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => fmt_err(format!("truncated while reading {what}")),
            _ => fmt_err(format!("reading {what}: {e}")),
        })?;
        Ok(b)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(fmt_err(format!("{what} must be 0 or 1, got {v}"))),
        }
    }
}

/// Parses a snapshot matrix, validating the header against the payload.
pub fn read_snapshots(r: impl Read) -> Result<SnapshotMatrix> {
    let mut r = Reader { inner: r };
    if &r.bytes::<4>("magic")? != MAGIC {
        return Err(fmt_err("not an NFSN file (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(fmt_err(format!("unsupported version {version}")));
    }
    let m = r.u32("element count")? as usize;
    let t = r.u32("snapshot count")? as usize;
    let lambda = r.f64("wavelength")?;
    let geometry = match r.u8("geometry kind")? {
        0 => {
            let n = r.u32("element count")? as usize;
            ArrayGeometry::ula(n, r.f64("spacing")?)?
        }
        1 => {
            let mx = r.u32("mx")? as usize;
            let my = r.u32("my")? as usize;
            ArrayGeometry::upa(mx, my, r.f64("spacing")?)?
        }
        k => return Err(fmt_err(format!("unknown geometry kind {k}"))),
    };
    if geometry.element_count() != m {
        return Err(fmt_err(format!("header says M={m}, geometry has {} elements", geometry.element_count())));
    }
    let model = match r.u8("phase model")? {
        0 => PhaseModel::Exact,
        1 => PhaseModel::Fresnel,
        v => return Err(fmt_err(format!("unknown phase model {v}"))),
    };
    let response = ArrayResponse::new(geometry, lambda, model)?;
    let truth = if r.flag("truth flag")? {
        let n = r.u32("truth count")? as usize;
        let mut v = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let phi = r.f64("truth azimuth")?;
            let has_psi = r.flag("truth elevation flag")?;
            let psi = r.f64("truth elevation")?;
            let range = r.f64("truth range")?;
            v.push(SourceLocation { phi, psi: has_psi.then_some(psi), range });
        }
        Some(v)
    } else {
        None
    };
    let total = m.checked_mul(t).ok_or_else(|| fmt_err("dimensions overflow"))?;
    let mut data = Vec::with_capacity(total.min(1 << 24));
    for _ in 0..total {
        let re = r.f64("sample")?;
        let im = r.f64("sample")?;
        data.push(C64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest).map_err(|e| fmt_err(e.to_string()))? != 0 {
        return Err(fmt_err("trailing bytes after the sample block"));
    }
    SnapshotMatrix::new(CMatrix::from_vec(m, t, data), response, truth)
}

pub fn save(path: &Path, snap: &SnapshotMatrix) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_snapshots(&mut w, snap).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<SnapshotMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_snapshots(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_snapshots, ChannelModel, Scenario, SourceSpec};
    use proptest::prelude::*;

    fn sample(planar: bool, seed: u64, truth: bool) -> SnapshotMatrix {
        let (resp, loc) = if planar {
            (
                ArrayResponse::with_default_model(ArrayGeometry::upa(3, 2, 0.01).unwrap(), 0.02).unwrap(),
                SourceLocation::with_elevation(0.2, -0.1, 1.5),
            )
        } else {
            (
                ArrayResponse::with_default_model(ArrayGeometry::ula(5, 0.005).unwrap(), 0.02).unwrap(),
                SourceLocation::new(-0.3, 0.7),
            )
        };
        let sc = Scenario::new(resp, vec![SourceSpec { location: loc, snr_db: 3.0 }], 7, ChannelModel::PureLos, seed);
        let mut s = simulate_snapshots(&sc).unwrap();
        if !truth {
            s.truth = None;
        }
        s
    }

    fn bytes(s: &SnapshotMatrix) -> Vec<u8> {
        let mut buf = Vec::new();
        write_snapshots(&mut buf, s).unwrap();
        buf
    }

    fn same(a: &SnapshotMatrix, b: &SnapshotMatrix) -> bool {
        let bits = |m: &CMatrix| m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        bits(&a.data) == bits(&b.data)
            && a.data.shape() == b.data.shape()
            && a.truth == b.truth
            && a.response.geometry() == b.response.geometry()
            && a.response.model() == b.response.model()
            && a.response.lambda().to_bits() == b.response.lambda().to_bits()
    }

    #[test]
    fn header_layout() {
        let s = sample(false, 1, false);
        let b = bytes(&s);
        assert_eq!(&b[..4], b"NFSN");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 0.02);
        assert_eq!(b[24], 0);
        // 24 + kind 1 + u32 + f64 + model 1 + truth flag 1 = 39 header bytes.
        assert_eq!(b.len(), 39 + 5 * 7 * 16);
        let first = f64::from_le_bytes(b[39..47].try_into().unwrap());
        assert_eq!(first, s.data[(0, 0)].re);
        let second = f64::from_le_bytes(b[55..63].try_into().unwrap());
        assert_eq!(second, s.data[(1, 0)].re);
    }

    #[test]
    fn round_trips() {
        for planar in [false, true] {
            for truth in [false, true] {
                let s = sample(planar, 2, truth);
                let back = read_snapshots(bytes(&s).as_slice()).unwrap();
                assert!(same(&s, &back));
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.nfsn");
        let s = sample(true, 3, true);
        save(&p, &s).unwrap();
        assert!(same(&s, &load(&p).unwrap()));
        assert!(matches!(load(&dir.path().join("missing.nfsn")), Err(Error::Io { .. })));
    }

    #[test]
    fn corrupt_inputs() {
        let b = bytes(&sample(false, 4, true));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshots(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(read_snapshots(bad.as_slice()).is_err());
        assert!(read_snapshots(&b[..b.len() - 3]).is_err());
        let mut bad = b.clone();
        bad.push(0);
        assert!(read_snapshots(bad.as_slice()).is_err());
        let mut bad = b.clone();
        bad[8] = 6;
        assert!(read_snapshots(bad.as_slice()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn arbitrary_bits_survive(m in 2usize..6, t in 1usize..6, raw in prop::collection::vec(any::<u64>(), 72)) {
            let resp = ArrayResponse::with_default_model(ArrayGeometry::ula(m, 0.005).unwrap(), 0.02).unwrap();
            // Any finite bit pattern, including subnormals and signed zeros.
            let vals: Vec<C64> = raw
                .chunks(2)
                .map(|c| {
                    let f = |b: u64| { let x = f64::from_bits(b); if x.is_finite() { x } else { f64::from_bits(b & 0x800F_FFFF_FFFF_FFFF) } };
                    C64::new(f(c[0]), f(c[1]))
                })
                .take(m * t)
                .collect();
            let s = SnapshotMatrix::new(CMatrix::from_vec(m, t, vals), resp, Some(vec![SourceLocation::new(0.1, 1.0)])).unwrap();
            let back = read_snapshots(bytes(&s).as_slice()).unwrap();
            prop_assert!(same(&s, &back));
        }
    }
}
