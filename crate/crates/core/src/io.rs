//! Flat-file formats: columnar little-endian binaries with a versioned header,
//! and CSV for small tables.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{build_gamma, OrbitShape, WeightedOrbit};
use crate::operators::SparseFunction;

pub const ORBIT_MAGIC: &[u8; 8] = b"RVLORBIT";
pub const SPARSE_MAGIC: &[u8; 8] = b"RVLSPARS";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get::<4>(r)?))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get::<8>(r)?))
}

fn header(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let m = get::<8>(r)?;
    if &m != magic {
        return Err(Error::Parse(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let v = get_u32(r)?;
    if v != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported format version {v}")));
    }
    Ok(())
}

/// Layout after the header: `n, k', k'', signed, degree, d, d×k exponents,
/// count`, then the point, weight and image columns.
pub fn write_orbit(w: &mut impl Write, orbit: &WeightedOrbit) -> Result<()> {
    w.write_all(ORBIT_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u64(w, orbit.n)?;
    put_u32(w, orbit.shape.kprime as u32)?;
    put_u32(w, orbit.shape.kdoubleprime as u32)?;
    w.write_all(&[orbit.shape.signed as u8])?;
    put_u32(w, orbit.gamma.degree())?;
    put_u32(w, orbit.gamma.len() as u32)?;
    for g in orbit.gamma.gammas() {
        for &e in g {
            put_u32(w, e)?;
        }
    }
    put_u64(w, orbit.len() as u64)?;
    for &v in &orbit.points {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &orbit.weights {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &orbit.images {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_orbit(r: &mut impl Read) -> Result<WeightedOrbit> {
    header(r, ORBIT_MAGIC)?;
    let n = get_u64(r)?;
    let kprime = get_u32(r)? as usize;
    let kdoubleprime = get_u32(r)? as usize;
    let signed = match get::<1>(r)?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::Parse(format!("bad signed flag {b}"))),
    };
    let shape = OrbitShape::new(kprime, kdoubleprime, signed);
    let k = shape.k();
    let degree = get_u32(r)?;
    let d = get_u32(r)? as usize;
    let mut keep = Vec::with_capacity(d);
    for _ in 0..d {
        keep.push((0..k).map(|_| get_u32(r)).collect::<Result<Vec<u32>>>()?);
    }
    let gamma = build_gamma(k, degree)?.select(&keep)?;
    let count = get_u64(r)? as usize;
    let col_i64 = |r: &mut dyn Read, len: usize| -> Result<Vec<i64>> {
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let points = col_i64(r, count * k)?;
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    let weights = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let images = col_i64(r, count * d)?;
    Ok(WeightedOrbit {
        n,
        shape,
        gamma,
        points,
        weights,
        images,
    })
}

/// One row per point: `x_1..x_k, weight, q_1..q_d`.
pub fn write_orbit_csv(w: &mut impl Write, orbit: &WeightedOrbit) -> Result<()> {
    let mut head: Vec<String> = (1..=orbit.k()).map(|i| format!("x{i}")).collect();
    head.push("weight".into());
    head.extend((1..=orbit.d()).map(|i| format!("q{i}")));
    writeln!(w, "{}", head.join(","))?;
    for i in 0..orbit.len() {
        let mut row: Vec<String> = orbit.point(i).iter().map(|v| v.to_string()).collect();
        row.push(format!("{:e}", orbit.weights[i]));
        row.extend(orbit.image(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_sparse(w: &mut impl Write, f: &SparseFunction) -> Result<()> {
    w.write_all(SPARSE_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u32(w, f.d0() as u32)?;
    put_u64(w, f.len() as u64)?;
    for (x, v) in f.iter() {
        for &c in x {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_sparse(r: &mut impl Read) -> Result<SparseFunction> {
    header(r, SPARSE_MAGIC)?;
    let d0 = get_u32(r)? as usize;
    let count = get_u64(r)?;
    let mut f = SparseFunction::new(d0);
    for _ in 0..count {
        let x = (0..d0)
            .map(|_| Ok(i64::from_le_bytes(get::<8>(r)?)))
            .collect::<Result<Vec<i64>>>()?;
        let re = f64::from_le_bytes(get::<8>(r)?);
        let im = f64::from_le_bytes(get::<8>(r)?);
        f.add(x, Complex64::new(re, im));
    }
    Ok(f)
}

/// Rows `x_1, …, x_{d0}, re, im` with a header line.
pub fn write_sparse_csv(w: &mut impl Write, f: &SparseFunction) -> Result<()> {
    let mut head: Vec<String> = (1..=f.d0()).map(|i| format!("x{i}")).collect();
    head.push("re".into());
    head.push("im".into());
    writeln!(w, "{}", head.join(","))?;
    for (x, v) in f.iter() {
        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{},{:e},{:e}", coords.join(","), v.re, v.im)?;
    }
    Ok(())
}

/// Reads rows `x_1, …, x_{d0}, re[, im]`. A header line (as written by
/// [`write_sparse_csv`]) fixes `d0` by its `x…` columns; without one, `d0` is
/// inferred from the leading integer cells of the first row.
pub fn read_sparse_csv(r: impl BufRead) -> Result<SparseFunction> {
    let mut f: Option<SparseFunction> = None;
    let mut d0: Option<usize> = None;
    let mut first = true;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if std::mem::take(&mut first) && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            d0 = Some(cells.iter().take_while(|c| c.starts_with('x')).count());
            continue;
        }
        let (x, v) = parse_row(&cells, d0).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let g = f.get_or_insert_with(|| SparseFunction::new(x.len()));
        if x.len() != g.d0() {
            return Err(Error::Parse(format!(
                "line {}: {} coordinates, expected {}",
                lineno + 1,
                x.len(),
                g.d0()
            )));
        }
        d0 = Some(g.d0());
        g.add(x, v);
    }
    f.ok_or_else(|| Error::Parse("no data rows".into()))
}

fn parse_row(cells: &[&str], d0: Option<usize>) -> std::result::Result<(Vec<i64>, Complex64), String> {
    let ints = match d0 {
        Some(d) => d,
        None => {
            let n = cells.iter().take_while(|c| c.parse::<i64>().is_ok()).count();
            // `x..., re` with an integral re would be swallowed; keep at least one value
            if n == cells.len() && n >= 2 { n - 1 } else { n }
        }
    };
    let rest = cells.get(ints..).unwrap_or(&[]);
    if ints == 0 || rest.is_empty() || rest.len() > 2 {
        return Err(format!("expected integer coordinates then re[, im], got {cells:?}"));
    }
    let x = cells[..ints]
        .iter()
        .map(|c| c.parse::<i64>().map_err(|e| format!("{c:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let re = num(rest[0])?;
    let im = if rest.len() == 2 { num(rest[1])? } else { 0.0 };
    Ok((x, Complex64::new(re, im)))
}

/// Rows `index, re[, im]` or a single column of reals (indexed from 1).
pub fn read_sequence_csv(r: impl BufRead) -> Result<(Vec<i64>, Vec<Complex64>)> {
    let mut idx = Vec::new();
    let mut vals = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<f64> = match line.split(',').map(|c| c.trim().parse::<f64>()).collect() {
            Ok(c) => c,
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
        };
        match cells.as_slice() {
            [re] => {
                idx.push(vals.len() as i64 + 1);
                vals.push(Complex64::new(*re, 0.0));
            }
            [i, re] => {
                idx.push(*i as i64);
                vals.push(Complex64::new(*re, 0.0));
            }
            [i, re, im] => {
                idx.push(*i as i64);
                vals.push(Complex64::new(*re, *im));
            }
            _ => return Err(Error::Parse(format!("line {}: expected 1 to 3 columns", lineno + 1))),
        }
    }
    Ok((idx, vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_orbit, ConvexBody, DEFAULT_ORBIT_CAP};
    use crate::numtheory::sieve_primes;

    #[test]
    fn orbit_roundtrip() {
        let t = sieve_primes(100).unwrap();
        let gamma = build_gamma(2, 2).unwrap();
        let o = enumerate_orbit(&ConvexBody::ball(2), 12, OrbitShape::new(1, 1, true), &gamma, &t, DEFAULT_ORBIT_CAP).unwrap();
        let mut buf = Vec::new();
        write_orbit(&mut buf, &o).unwrap();
        assert_eq!(read_orbit(&mut buf.as_slice()).unwrap(), o);
        buf[8] = 9;
        assert!(matches!(read_orbit(&mut buf.as_slice()), Err(Error::Parse(_))));
        let mut csv = Vec::new();
        write_orbit_csv(&mut csv, &o).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), o.len() + 1);
    }

    #[test]
    fn sparse_roundtrip() {
        let f = SparseFunction::random(3, 40, 9, 7);
        let mut buf = Vec::new();
        write_sparse(&mut buf, &f).unwrap();
        assert_eq!(read_sparse(&mut buf.as_slice()).unwrap(), f);
        let mut csv = Vec::new();
        write_sparse_csv(&mut csv, &f).unwrap();
        let g = read_sparse_csv(csv.as_slice()).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn sparse_csv_forms() {
        let g = read_sparse_csv("x,value\n0,1\n3,2.5\n".as_bytes()).unwrap();
        assert_eq!(g.get(&[3]), Complex64::new(2.5, 0.0));
        let g = read_sparse_csv("1,2,0.5,-1\n".as_bytes()).unwrap();
        assert_eq!(g.get(&[1, 2]), Complex64::new(0.5, -1.0));
        assert!(read_sparse_csv("1,2,3\nfoo\n".as_bytes()).is_err());
    }

    #[test]
    fn sequence_csv() {
        let (i, v) = read_sequence_csv("n,re\n1,0.5\n4,2\n".as_bytes()).unwrap();
        assert_eq!(i, vec![1, 4]);
        assert_eq!(v[1], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn sparse_csv_header_fixes_dimension() {
        let f = read_sparse_csv("x1,x2,re,im\n0,0,1,0\n3,-2,2,5\n".as_bytes()).unwrap();
        assert_eq!(f.d0(), 2);
        assert_eq!(f.get(&[3, -2]), Complex64::new(2.0, 5.0));
        assert!(read_sparse_csv("x1,re\n1,2,3,4\n".as_bytes()).is_err());
    }
}
