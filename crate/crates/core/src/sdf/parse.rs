//! Scene language: one s-expression per component, `;` line comments.

use std::fmt::{self, Write};

use super::{SdfExpr, TerrainParams};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("unexpected {0}")]
    UnexpectedToken(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` takes {expected} arguments, found {found}")]
    Arity { op: String, expected: usize, found: usize },
    #[error("expected a number, found `{0}`")]
    BadNumber(String),
    #[error("expected an integer, found `{0}`")]
    BadInteger(String),
    #[error("expected a nested expression")]
    ExpectedExpr,
    #[error("expected a number, found a nested expression")]
    ExpectedNumber,
    #[error("`{op}` requires a positive {what}")]
    NonPositive { op: String, what: &'static str },
    #[error("plane normal must be non-zero")]
    ZeroNormal,
    #[error("scene contains no expression")]
    Empty,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

impl Pos {
    fn err(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            kind,
        }
    }
}

#[derive(Debug)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<(Token, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                chars.next();
                col += 1;
                out.push((Token::Open, pos));
            }
            ')' => {
                chars.next();
                col += 1;
                out.push((Token::Close, pos));
            }
            c if c.is_ascii_alphanumeric() || "+-._".contains(c) => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                    col += 1;
                }
                out.push((Token::Atom(atom), pos));
            }
            other => return Err(pos.err(ParseErrorKind::UnexpectedChar(other))),
        }
    }
    Ok(out)
}

enum Node {
    Atom(String, Pos),
    List(Vec<Node>, Pos),
}

impl Node {
    fn pos(&self) -> Pos {
        match self {
            Node::Atom(_, p) | Node::List(_, p) => *p,
        }
    }
}

struct Reader {
    tokens: Vec<(Token, Pos)>,
    at: usize,
    end: Pos,
}

impl Reader {
    fn read(&mut self) -> Result<Node, ParseError> {
        let Some((tok, pos)) = self.tokens.get(self.at) else {
            return Err(self.end.err(ParseErrorKind::UnexpectedEof));
        };
        let pos = *pos;
        self.at += 1;
        match tok {
            Token::Atom(a) => Ok(Node::Atom(a.clone(), pos)),
            Token::Close => Err(pos.err(ParseErrorKind::UnexpectedToken("`)`".into()))),
            Token::Open => {
                let mut items = Vec::new();
                loop {
                    match self.tokens.get(self.at) {
                        None => return Err(self.end.err(ParseErrorKind::UnexpectedEof)),
                        Some((Token::Close, _)) => {
                            self.at += 1;
                            return Ok(Node::List(items, pos));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
        }
    }
}

fn number(node: &Node) -> Result<f64, ParseError> {
    match node {
        Node::Atom(a, pos) => match a.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(pos.err(ParseErrorKind::BadNumber(a.clone()))),
        },
        Node::List(_, pos) => Err(pos.err(ParseErrorKind::ExpectedNumber)),
    }
}

fn integer<T: std::str::FromStr>(node: &Node) -> Result<T, ParseError> {
    match node {
        Node::Atom(a, pos) => a
            .parse::<T>()
            .map_err(|_| pos.err(ParseErrorKind::BadInteger(a.clone()))),
        Node::List(_, pos) => Err(pos.err(ParseErrorKind::ExpectedNumber)),
    }
}

fn vec3(args: &[Node]) -> Result<Vec3, ParseError> {
    Ok(Vec3::new(number(&args[0])?, number(&args[1])?, number(&args[2])?))
}

fn positive(v: f64, op: &str, what: &'static str, pos: Pos) -> Result<f64, ParseError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(pos.err(ParseErrorKind::NonPositive {
            op: op.to_string(),
            what,
        }))
    }
}

fn build(node: &Node) -> Result<SdfExpr, ParseError> {
    let (items, pos) = match node {
        Node::List(items, pos) => (items, *pos),
        Node::Atom(_, pos) => return Err(pos.err(ParseErrorKind::ExpectedExpr)),
    };
    let Some((head, args)) = items.split_first() else {
        return Err(pos.err(ParseErrorKind::UnexpectedToken("empty list".into())));
    };
    let op = match head {
        Node::Atom(a, _) => a.as_str(),
        Node::List(_, p) => return Err(p.err(ParseErrorKind::UnexpectedToken("list in operator position".into()))),
    };
    let expected = match op {
        "plane" | "sphere" => 4,
        "box" | "terrain" => 6,
        "union" | "intersect" | "difference" | "offset" | "scale" => 2,
        "translate" => 4,
        _ => return Err(head.pos().err(ParseErrorKind::UnknownOperator(op.to_string()))),
    };
    if args.len() != expected {
        return Err(pos.err(ParseErrorKind::Arity {
            op: op.to_string(),
            expected,
            found: args.len(),
        }));
    }
    let child = |i: usize| build(&args[i]).map(Box::new);
    Ok(match op {
        "plane" => {
            let n = vec3(&args[..3])?;
            let d = number(&args[3])?;
            let len = n.norm();
            if len == 0.0 {
                return Err(pos.err(ParseErrorKind::ZeroNormal));
            }
            if (len - 1.0).abs() > 1e-9 {
                SdfExpr::Plane {
                    normal: n / len,
                    offset: d / len,
                }
            } else {
                SdfExpr::Plane { normal: n, offset: d }
            }
        }
        "sphere" => SdfExpr::Sphere {
            center: vec3(&args[..3])?,
            radius: positive(number(&args[3])?, op, "radius", args[3].pos())?,
        },
        "box" => {
            let h = vec3(&args[3..6])?;
            for (i, c) in h.iter().enumerate() {
                positive(*c, op, "half extent", args[3 + i].pos())?;
            }
            SdfExpr::Box {
                center: vec3(&args[..3])?,
                half_extents: h,
            }
        }
        "terrain" => {
            let octaves: u32 = integer(&args[1])?;
            if octaves == 0 {
                return Err(args[1].pos().err(ParseErrorKind::NonPositive {
                    op: op.into(),
                    what: "octave count",
                }));
            }
            SdfExpr::Terrain(TerrainParams {
                seed: integer(&args[0])?,
                octaves,
                lacunarity: number(&args[2])?,
                gain: number(&args[3])?,
                horizontal_scale: positive(number(&args[4])?, op, "horizontal scale", args[4].pos())?,
                vertical_scale: number(&args[5])?,
            })
        }
        "union" => SdfExpr::Union(child(0)?, child(1)?),
        "intersect" => SdfExpr::Intersect(child(0)?, child(1)?),
        "difference" => SdfExpr::Difference(child(0)?, child(1)?),
        "offset" => SdfExpr::Offset(child(0)?, number(&args[1])?),
        "translate" => SdfExpr::Translate(vec3(&args[..3])?, child(3)?),
        "scale" => SdfExpr::Scale(
            positive(number(&args[0])?, op, "scale factor", args[0].pos())?,
            child(1)?,
        ),
        _ => unreachable!(),
    })
}

/// Parses every top-level expression of a scene file; each is one mesh
/// component and the scene field is their union.
pub fn parse_components(text: &str) -> Result<Vec<SdfExpr>, ParseError> {
    let tokens = tokenize(text)?;
    let last_line = text.lines().count().max(1);
    let last_col = text.lines().last().map_or(0, |l| l.chars().count()) + 1;
    let mut reader = Reader {
        tokens,
        at: 0,
        end: Pos {
            line: last_line,
            col: last_col,
        },
    };
    let mut out = Vec::new();
    while reader.at < reader.tokens.len() {
        let node = reader.read()?;
        out.push(build(&node)?);
    }
    if out.is_empty() {
        return Err(reader.end.err(ParseErrorKind::Empty));
    }
    Ok(out)
}

/// Parses a scene into a single field; several top-level expressions are
/// combined by union.
pub fn parse_scene(text: &str) -> Result<SdfExpr, ParseError> {
    let comps = parse_components(text)?;
    Ok(SdfExpr::union_all(comps).expect("non-empty"))
}

/// Prints an expression in the scene language. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn format_scene(expr: &SdfExpr) -> String {
    let mut s = String::new();
    write_expr(&mut s, expr).expect("writing to a String");
    s
}

fn write_expr(out: &mut String, expr: &SdfExpr) -> fmt::Result {
    match expr {
        SdfExpr::Plane { normal: n, offset } => {
            write!(out, "(plane {} {} {} {})", n.x, n.y, n.z, offset)
        }
        SdfExpr::Sphere { center: c, radius } => {
            write!(out, "(sphere {} {} {} {})", c.x, c.y, c.z, radius)
        }
        SdfExpr::Box {
            center: c,
            half_extents: h,
        } => write!(out, "(box {} {} {} {} {} {})", c.x, c.y, c.z, h.x, h.y, h.z),
        SdfExpr::Terrain(t) => write!(
            out,
            "(terrain {} {} {} {} {} {})",
            t.seed, t.octaves, t.lacunarity, t.gain, t.horizontal_scale, t.vertical_scale
        ),
        SdfExpr::Union(a, b) => binary(out, "union", a, b),
        SdfExpr::Intersect(a, b) => binary(out, "intersect", a, b),
        SdfExpr::Difference(a, b) => binary(out, "difference", a, b),
        SdfExpr::Offset(a, d) => {
            out.push_str("(offset ");
            write_expr(out, a)?;
            write!(out, " {d})")
        }
        SdfExpr::Translate(d, a) => {
            write!(out, "(translate {} {} {} ", d.x, d.y, d.z)?;
            write_expr(out, a)?;
            out.push(')');
            Ok(())
        }
        SdfExpr::Scale(s, a) => {
            write!(out, "(scale {s} ")?;
            write_expr(out, a)?;
            out.push(')');
            Ok(())
        }
    }
}

fn binary(out: &mut String, op: &str, a: &SdfExpr, b: &SdfExpr) -> fmt::Result {
    write!(out, "({op} ")?;
    write_expr(out, a)?;
    out.push(' ');
    write_expr(out, b)?;
    out.push(')');
    Ok(())
}
