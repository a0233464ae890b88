//! Plain-text channel dumps for replaying realizations in tests.
//!
//! ```text
//! # comments and blank lines are ignored
//! channels 1
//! alpha 0.8
//! dims <M> <Q> <K>
//! h_sr
//! <M rows of Q entries>
//! tag 1
//! h_st <Q entries>
//! h_tr <M entries>
//! tag 2
//! ...
//! ```
//!
//! Entries are complex numbers written `a+bi` or `a-bi` with no inner
//! spaces, e.g. `0.25-1.5e-3i`. Cascades are rebuilt on load, so they are
//! bit-identical to the ones of the written realization.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;

use super::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector};

const MAGIC: &str = "channels";
const VERSION: &str = "1";

fn fmt_complex(out: &mut String, z: Complex64) {
    // `{:?}` prints the shortest string that parses back to the same bits.
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    let _ = write!(out, "{:?}{}{:?}i", z.re, sign, z.im.abs());
}

fn parse_real(s: &str, line: usize) -> Result<f64> {
    let ok = !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'));
    let v: f64 = if ok { s.parse().ok() } else { None }.ok_or_else(|| Error::Parse {
        line,
        detail: format!("bad number '{s}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            detail: format!("non-finite number '{s}'"),
        });
    }
    Ok(v)
}

/// Parses one `a+bi` token.
pub fn parse_complex(tok: &str, line: usize) -> Result<Complex64> {
    let bad = || Error::Parse {
        line,
        detail: format!("bad complex entry '{tok}', expected a+bi"),
    };
    let body = tok.strip_suffix('i').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re = parse_real(&body[..split], line)?;
    let im_abs = &body[split + 1..];
    if im_abs.starts_with(['+', '-']) {
        return Err(bad());
    }
    let mut im = parse_real(im_abs, line)?;
    if bytes[split] == b'-' {
        im = -im;
    }
    Ok(Complex64::new(re, im))
}

/// Serializes the raw links of a realization.
pub fn write_channel_text(ch: &ChannelRealization) -> String {
    let (m, q) = (ch.rx_antennas(), ch.tx_antennas());
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "alpha {:?}", ch.alpha);
    let _ = writeln!(out, "dims {m} {q} {}", ch.num_tags());
    out.push_str("h_sr\n");
    for i in 0..m {
        for j in 0..q {
            if j > 0 {
                out.push(' ');
            }
            fmt_complex(&mut out, ch.h_sr[(i, j)]);
        }
        out.push('\n');
    }
    for (k, t) in ch.tags.iter().enumerate() {
        let _ = writeln!(out, "tag {}", k + 1);
        for (name, v) in [("h_st", &t.h_st), ("h_tr", &t.h_tr)] {
            out.push_str(name);
            for z in v.iter() {
                out.push(' ');
                fmt_complex(&mut out, *z);
            }
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = body.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok((i + 1, toks));
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            detail: "unexpected end of input".into(),
        })
    }

    fn keyword(&mut self, key: &str, args: usize) -> Result<(usize, Vec<&'a str>)> {
        let (line, toks) = self.next_tokens()?;
        if toks[0] != key || toks.len() != args + 1 {
            return Err(Error::Parse {
                line,
                detail: format!("expected '{key}' with {args} value(s), got '{}'", toks.join(" ")),
            });
        }
        Ok((line, toks[1..].to_vec()))
    }
}

fn parse_count(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("bad count '{s}'"),
    })
}

fn parse_row(toks: &[&str], line: usize) -> Result<ComplexVector> {
    let vals = toks
        .iter()
        .map(|t| parse_complex(t, line))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

// Keeps a hostile header from requesting an enormous allocation.
const MAX_DIM: usize = 1 << 16;

/// Parses the format written by [`write_channel_text`].
pub fn parse_channel_text(text: &str) -> Result<ChannelRealization> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (line, v) = lines.keyword(MAGIC, 1)?;
    if v[0] != VERSION {
        return Err(Error::Parse {
            line,
            detail: format!("unsupported version '{}'", v[0]),
        });
    }
    let (line, v) = lines.keyword("alpha", 1)?;
    let alpha = parse_real(v[0], line)?;
    let (line, v) = lines.keyword("dims", 3)?;
    let m = parse_count(v[0], line)?;
    let q = parse_count(v[1], line)?;
    let k = parse_count(v[2], line)?;
    if m == 0 || q == 0 || m > MAX_DIM || q > MAX_DIM || k > MAX_DIM {
        return Err(Error::Parse {
            line,
            detail: format!("dimensions {m} x {q} with {k} tags out of range"),
        });
    }
    lines.keyword("h_sr", 0)?;
    let mut h_sr = ComplexMatrix::zeros(m, q);
    for i in 0..m {
        let (line, toks) = lines.next_tokens()?;
        if toks.len() != q {
            return Err(Error::Parse {
                line,
                detail: format!("direct-link row has {} entries, expected {q}", toks.len()),
            });
        }
        h_sr.set_row(i, &parse_row(&toks, line)?.transpose());
    }
    let mut links = Vec::with_capacity(k.min(1024));
    for idx in 1..=k {
        let (line, v) = lines.keyword("tag", 1)?;
        if parse_count(v[0], line)? != idx {
            return Err(Error::Parse {
                line,
                detail: format!("expected tag {idx}, got '{}'", v[0]),
            });
        }
        let (line, v) = lines.keyword("h_st", q)?;
        let h_st = parse_row(&v, line)?;
        let (line, v) = lines.keyword("h_tr", m)?;
        let h_tr = parse_row(&v, line)?;
        links.push((h_st, h_tr));
    }
    if let Ok((line, toks)) = lines.next_tokens() {
        return Err(Error::Parse {
            line,
            detail: format!("trailing content '{}'", toks.join(" ")),
        });
    }
    ChannelRealization::from_links(alpha, h_sr, links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::gen_channel_set;
    use crate::params::SystemParams;

    #[test]
    fn complex_tokens() {
        let z = parse_complex("1.5-2e-3i", 1).unwrap();
        assert_eq!(z, Complex64::new(1.5, -2e-3));
        let z = parse_complex("-1E+2+0.5i", 1).unwrap();
        assert_eq!(z, Complex64::new(-100.0, 0.5));
        for bad in ["", "1", "1+i", "i", "1+2", "1++2i", "nan+1i", "1+infi", "1 + 2i", "0x1+2i"] {
            assert!(parse_complex(bad, 3).is_err(), "{bad}");
        }
    }

    #[test]
    fn negative_zero_round_trips() {
        let mut s = String::new();
        fmt_complex(&mut s, Complex64::new(-0.0, -0.0));
        assert_eq!(s, "-0.0-0.0i");
        let z = parse_complex(&s, 1).unwrap();
        assert!(z.re.is_sign_negative() && z.im.is_sign_negative());
    }

    #[test]
    fn realization_round_trips_bit_exact() {
        let p = SystemParams {
            tx_antennas: 2,
            ..Default::default()
        };
        let ch = gen_channel_set(&p, 11).unwrap();
        let text = write_channel_text(&ch);
        assert_eq!(parse_channel_text(&text).unwrap(), ch);
    }

    #[test]
    fn malformed_inputs_report_lines() {
        let good = "channels 1\nalpha 0.5\ndims 2 1 1\nh_sr\n1+0i\n0-1i\ntag 1\nh_st 1+0i\nh_tr 1+1i 2+2i\n";
        let ch = parse_channel_text(good).unwrap();
        assert_eq!(ch.tags[0].h_str[(1, 0)], Complex64::new(1.0, 1.0));
        let err = parse_channel_text(&good.replace("h_tr 1+1i 2+2i", "h_tr 1+1i")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 9, .. }), "{err}");
        assert!(parse_channel_text(&good.replace("alpha 0.5", "alpha 2")).is_err());
        assert!(parse_channel_text(&format!("{good}tag 2\n")).is_err());
        assert!(parse_channel_text("channels 2\n").is_err());
        assert!(parse_channel_text("").is_err());
    }
}
