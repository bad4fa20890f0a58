//! `POLYGON` well-known text.

use std::fmt::Write as _;

use super::{GeometryError, LinearRing, Point2, Polygon};

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, GeometryError> {
        Err(GeometryError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), GeometryError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(got) => self.err(format!("expected `{c}`, found `{got}`")),
            None => self.err(format!("expected `{c}`, found end of input")),
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let end = rest
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn number(&mut self) -> Result<f64, GeometryError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let end = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
            .unwrap_or(rest.len());
        if end == 0 {
            return self.err("expected a number");
        }
        match rest[..end].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += end;
                Ok(v)
            }
            _ => self.err(format!("invalid number `{}`", &rest[..end])),
        }
    }

    fn ring(&mut self) -> Result<LinearRing, GeometryError> {
        self.expect('(')?;
        let mut pts: Vec<Point2> = Vec::new();
        loop {
            let x = self.number()?;
            let y = self.number()?;
            let p = Point2::new(x, y);
            // Repeated consecutive vertices carry no shape; drop them.
            if pts.last() != Some(&p) {
                pts.push(p);
            }
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return self.err("expected `,` or `)` in coordinate list"),
            }
        }
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        LinearRing::new(pts)
    }
}

/// Parses `POLYGON ((x y, ...), (x y, ...))`. The first ring is the
/// exterior; an explicit closing vertex is accepted and stripped.
pub fn parse_wkt(text: &str) -> Result<Polygon, GeometryError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let kw = cur.word();
    if !kw.eq_ignore_ascii_case("POLYGON") {
        if kw.is_empty() {
            return cur.err("expected `POLYGON`");
        }
        return Err(GeometryError::UnsupportedGeometry(kw.to_string()));
    }
    cur.expect('(')?;
    let mut rings = vec![cur.ring()?];
    loop {
        match cur.peek() {
            Some(',') => {
                cur.pos += 1;
                rings.push(cur.ring()?);
            }
            Some(')') => {
                cur.pos += 1;
                break;
            }
            _ => return cur.err("expected `,` or `)` after ring"),
        }
    }
    if cur.peek().is_some() {
        return cur.err("trailing characters");
    }
    let exterior = rings.remove(0);
    Ok(Polygon::new(exterior, rings))
}

/// Writes `POLYGON` text with explicitly closed rings and shortest
/// round-trip decimal coordinates.
pub fn write_wkt(poly: &Polygon) -> String {
    let mut out = String::from("POLYGON (");
    for (k, ring) in poly.rings().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        out.push('(');
        let v = ring.vertices();
        for p in v.iter().chain(v.first()) {
            if !out.ends_with('(') {
                out.push_str(", ");
            }
            let _ = write!(out, "{} {}", p.x, p.y);
        }
        out.push(')');
    }
    out.push(')');
    out
}
