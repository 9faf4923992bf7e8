//! Text format for sampling patterns.
//!
//! ```text
//! sp v1 <ny> <nz> <nt> <m>
//! <ky> <kz> <t>        one line per sampled point, ascending (ky, kz, t)
//! <ky> <kz> <t> c      calibration points carry a trailing `c`
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kspace::{GridShape, KPoint, SamplingPattern};

pub fn sp_to_string(sp: &SamplingPattern) -> String {
    let (ny, nz, nt) = sp.grid();
    let mut out = format!("sp v1 {ny} {nz} {nt} {}\n", sp.len());
    for p in sp.points() {
        if sp.is_calibration(p) {
            writeln!(out, "{} {} {} c", p.ky, p.kz, p.t).unwrap();
        } else {
            writeln!(out, "{} {} {}", p.ky, p.kz, p.t).unwrap();
        }
    }
    out
}

pub fn write_sp(sp: &SamplingPattern, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, sp_to_string(sp))?;
    Ok(())
}

/// Parses the text form; `origin` only labels error messages.
pub fn parse_sp(text: &str, origin: &Path) -> Result<SamplingPattern> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "sp" || fields[1] != "v1" {
        return Err(err(1, format!("expected `sp v1 ny nz nt m`, got `{header}`")));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| err(1, format!("invalid {what} `{s}`")))
    };
    let ny = num(fields[2], "ny")?;
    let nz = num(fields[3], "nz")?;
    let nt = num(fields[4], "nt")?;
    let m = num(fields[5], "m")?;

    let mut sp = SamplingPattern::with_calibration(ny, nz, nt, std::iter::empty())
        .map_err(|e| err(1, e.to_string()))?;
    let mut cal = Vec::new();
    let mut plain = Vec::new();
    let mut seen = vec![false; sp.cells()];
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let is_cal = match toks.len() {
            3 => false,
            4 if toks[3] == "c" => true,
            _ => return Err(err(lineno, format!("expected `ky kz t [c]`, got `{line}`"))),
        };
        let mut coord = [0usize; 3];
        for (slot, tok) in coord.iter_mut().zip(&toks) {
            *slot = tok
                .parse()
                .map_err(|_| err(lineno, format!("invalid index `{tok}`")))?;
        }
        let p = KPoint::new(coord[0], coord[1], coord[2]);
        let idx = sp.index_of(p).map_err(|e| err(lineno, e.to_string()))?;
        if seen[idx] {
            return Err(err(lineno, format!("duplicate point {p}")));
        }
        seen[idx] = true;
        if is_cal {
            cal.push(p);
        } else {
            plain.push(p);
        }
    }
    sp = SamplingPattern::from_points(ny, nz, nt, plain, cal)
        .map_err(|e| err(1, e.to_string()))?;
    if sp.len() != m {
        return Err(err(1, format!("header declares {m} points, file lists {}", sp.len())));
    }
    Ok(sp)
}

pub fn read_sp(path: impl AsRef<Path>) -> Result<SamplingPattern> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_sp(&text, path)
}

/// Reads a pattern and checks it lives on `grid`.
pub fn read_sp_for(path: impl AsRef<Path>, grid: &GridShape) -> Result<SamplingPattern> {
    let sp = read_sp(&path)?;
    if !sp.matches(grid) {
        return Err(Error::shape(format!(
            "{} holds a {:?} pattern, expected {}x{}x{}",
            path.as_ref().display(),
            sp.grid(),
            grid.ny,
            grid.nz,
            grid.nt
        )));
    }
    Ok(sp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{generate_uniform, CalibrationSpec};
    use proptest::prelude::*;

    fn origin() -> &'static Path {
        Path::new("test.sp")
    }

    #[test]
    fn canonical_text() {
        let sp = SamplingPattern::from_points(
            4,
            4,
            1,
            [KPoint::new(0, 3, 0)],
            [KPoint::new(2, 2, 0)],
        )
        .unwrap();
        assert_eq!(sp_to_string(&sp), "sp v1 4 4 1 2\n0 3 0\n2 2 0 c\n");
    }

    #[test]
    fn malformed_line_names_line() {
        let text = "sp v1 4 4 1 2\n0 3 0\n2 x 0\n";
        match parse_sp(text, origin()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "sp v1 4 4 1 2\n0 3 0\n2 2 0 q\n";
        assert!(matches!(parse_sp(text, origin()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn duplicates_rejected() {
        let text = "sp v1 4 4 1 2\n0 3 0\n0 3 0\n";
        assert!(matches!(parse_sp(text, origin()), Err(Error::Parse { line: 3, .. })));
        let text = "sp v1 4 4 1 2\n0 3 0\n0 3 0 c\n";
        assert!(parse_sp(text, origin()).is_err());
    }

    #[test]
    fn count_and_bounds_checked() {
        assert!(parse_sp("sp v1 4 4 1 3\n0 3 0\n", origin()).is_err());
        assert!(parse_sp("sp v1 4 4 1 1\n4 0 0\n", origin()).is_err());
        assert!(parse_sp("sp v2 4 4 1 0\n", origin()).is_err());
    }

    #[test]
    fn grid_mismatch_on_contextual_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.sp");
        let g = GridShape::new(8, 8, 1, 1).unwrap();
        let sp = generate_uniform(&g, 20, &CalibrationSpec::new(1, 1, Default::default()), 1)
            .unwrap();
        write_sp(&sp, &path).unwrap();
        assert_eq!(read_sp_for(&path, &g).unwrap(), sp);
        let other = GridShape::new(8, 6, 1, 1).unwrap();
        assert!(matches!(read_sp_for(&path, &other), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(ny in 3usize..12, nz in 3usize..12, nt in 1usize..3,
                                   frac in 0.0f64..1.0, seed in any::<u64>()) {
            let g = GridShape::new(ny, nz, nt, 1).unwrap();
            let cal = CalibrationSpec::new(1, 1, Default::default());
            let lo = 9 * nt;
            let m = lo + ((g.cells() - lo) as f64 * frac) as usize;
            let sp = generate_uniform(&g, m, &cal, seed).unwrap();
            let text = sp_to_string(&sp);
            let back = parse_sp(&text, origin()).unwrap();
            prop_assert_eq!(&back, &sp);
            prop_assert_eq!(sp_to_string(&back), text);
        }
    }
}
