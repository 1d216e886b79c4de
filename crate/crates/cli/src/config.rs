//! Space-expression configs.
//!
//! A config is a list of `key = value` statements, one per line. Values are
//! numbers, bare names, named nodes with arguments, or bracketed lists:
//!
//! ```text
//! # X_p with w_s = s^(-1/4)
//! p = 4
//! space = xp(w = power_decay(alpha = 0.25))
//! ```
//!
//! Arguments may be given by keyword or by position. Recognized statements
//! are `p` (required), `space`, `profile` and `variables`.

use std::fmt;

use pwnorm::experiments::ThreePoint;
use pwnorm::spaces::{self, Count, OrdinalDesc, PieceSizes, SizeProfile};
use pwnorm::{Error, Family, WeightDescriptor as W};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {}, column {}: {msg}", pos.line, pos.col)]
    Syntax { pos: Pos, msg: String },
    #[error("{path} (line {}, column {}): {msg}", pos.line, pos.col)]
    Semantic { path: String, pos: Pos, msg: String },
}

fn syntax<T>(pos: Pos, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Syntax { pos, msg: msg.into() })
}

fn semantic<T>(path: &str, pos: Pos, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Semantic { path: path.to_string(), pos, msg: msg.into() })
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Open,
    Close,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Newline,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ConfigError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos { line: li + 1, col: i + 1 };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let single = match c {
                '(' => Some(Tok::Open),
                ')' => Some(Tok::Close),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                '=' => Some(Tok::Eq),
                _ => None,
            };
            if let Some(t) = single {
                out.push((t, pos));
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => out.push((Tok::Num(v), pos)),
                    _ => return syntax(pos, format!("malformed number '{s}'")),
                }
            } else {
                return syntax(pos, format!("unexpected character '{c}'"));
            }
        }
        out.push((Tok::Newline, Pos { line: li + 1, col: chars.len() + 1 }));
    }
    let end = match out.last() {
        Some((_, p)) => *p,
        None => Pos { line: 1, col: 1 },
    };
    out.push((Tok::End, end));
    Ok(out)
}

// ---------------------------------------------------------------- syntax tree

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64, Pos),
    Node(Node),
    List(Vec<Value>, Pos),
}

impl Value {
    pub fn pos(&self) -> Pos {
        match self {
            Value::Num(_, p) | Value::List(_, p) => *p,
            Value::Node(n) => n.pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub args: Vec<(Option<String>, Value)>,
    pub pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    /// Newlines inside brackets are insignificant.
    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<Pos, ConfigError> {
        if *self.peek() == t {
            Ok(self.bump().1)
        } else {
            syntax(self.pos(), format!("expected {what}"))
        }
    }

    fn value(&mut self) -> Result<Value, ConfigError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Value::Num(v, pos)),
            Tok::LBracket => {
                let mut items = Vec::new();
                self.skip_newlines();
                if *self.peek() != Tok::RBracket {
                    loop {
                        self.skip_newlines();
                        items.push(self.value()?);
                        self.skip_newlines();
                        if *self.peek() == Tok::Comma {
                            self.bump();
                            self.skip_newlines();
                            if *self.peek() == Tok::RBracket {
                                break;
                            }
                        } else {
                            break;
                        }
                    }
                }
                self.skip_newlines();
                self.expect(Tok::RBracket, "',' or ']'")?;
                Ok(Value::List(items, pos))
            }
            Tok::Ident(name) => {
                let mut args = Vec::new();
                if *self.peek() == Tok::Open {
                    self.bump();
                    self.skip_newlines();
                    if *self.peek() != Tok::Close {
                        loop {
                            self.skip_newlines();
                            let key = match (&self.toks[self.at].0, &self.toks.get(self.at + 1).map(|t| &t.0)) {
                                (Tok::Ident(k), Some(Tok::Eq)) => {
                                    let k = k.clone();
                                    self.bump();
                                    self.bump();
                                    Some(k)
                                }
                                _ => None,
                            };
                            args.push((key, self.value()?));
                            self.skip_newlines();
                            if *self.peek() == Tok::Comma {
                                self.bump();
                                self.skip_newlines();
                                if *self.peek() == Tok::Close {
                                    break;
                                }
                            } else {
                                break;
                            }
                        }
                    }
                    self.skip_newlines();
                    self.expect(Tok::Close, "',' or ')'")?;
                }
                Ok(Value::Node(Node { name, args, pos }))
            }
            _ => syntax(pos, "expected a number, a name or '['"),
        }
    }

    fn document(&mut self) -> Result<Vec<(String, Pos, Value)>, ConfigError> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if *self.peek() == Tok::End {
                return Ok(out);
            }
            let (tok, pos) = self.bump();
            let Tok::Ident(key) = tok else {
                return syntax(pos, "expected a statement name");
            };
            self.expect(Tok::Eq, "'='")?;
            let value = self.value()?;
            if !matches!(self.peek(), Tok::Newline | Tok::End) {
                return syntax(self.pos(), "expected end of line");
            }
            out.push((key, pos, value));
        }
    }
}

// ---------------------------------------------------------------- typed config

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceExpr {
    Lp,
    L2(W),
    SumL2Lp(W),
    Xp(W),
    Schechtman(W, W),
    Yn { n: usize, w: W },
    P2wSum { children: Vec<SpaceExpr>, w: W },
    LpSum(Vec<SpaceExpr>),
    Tensor(Box<SpaceExpr>, Box<SpaceExpr>),
    XpAlpha(OrdinalDesc),
    Envelope(Box<SpaceExpr>),
    Admissible { inner: Box<SpaceExpr>, w: Option<W> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub p: f64,
    pub space: Option<SpaceExpr>,
    pub profile: Option<SizeProfile>,
    pub variables: Option<Vec<ThreePoint>>,
}

/// Named arguments of one node, matched by keyword or position.
struct Args<'a> {
    node: &'a Node,
    path: String,
    slots: Vec<Option<&'a Value>>,
    params: &'static [&'static str],
}

impl<'a> Args<'a> {
    fn new(node: &'a Node, path: &str, params: &'static [&'static str]) -> Result<Self, ConfigError> {
        let mut slots = vec![None; params.len()];
        let mut next = 0;
        for (key, value) in &node.args {
            let i = match key {
                Some(k) => match params.iter().position(|p| p == k) {
                    Some(i) => i,
                    None => {
                        return semantic(path, value.pos(), format!("{} has no parameter '{k}'", node.name));
                    }
                },
                None => {
                    if next >= params.len() {
                        return semantic(path, value.pos(), format!("too many arguments to {}", node.name));
                    }
                    next
                }
            };
            if slots[i].is_some() {
                return semantic(path, value.pos(), format!("parameter '{}' given twice", params[i]));
            }
            slots[i] = Some(value);
            next = i + 1;
        }
        Ok(Args { node, path: path.to_string(), slots, params })
    }

    fn sub(&self, i: usize) -> String {
        format!("{}.{}", self.path, self.params[i])
    }

    fn get(&self, i: usize) -> Result<&'a Value, ConfigError> {
        match self.slots[i] {
            Some(v) => Ok(v),
            None => semantic(&self.path, self.node.pos, format!("{} needs '{}'", self.node.name, self.params[i])),
        }
    }

    fn num(&self, i: usize) -> Result<f64, ConfigError> {
        match self.get(i)? {
            Value::Num(v, _) => Ok(*v),
            v => semantic(&self.sub(i), v.pos(), "expected a number"),
        }
    }

    fn int(&self, i: usize) -> Result<u64, ConfigError> {
        let v = self.num(i)?;
        if v < 0.0 || v.fract() != 0.0 || v > 9.0e15 {
            return semantic(&self.sub(i), self.get(i)?.pos(), format!("expected a nonnegative integer, got {v}"));
        }
        Ok(v as u64)
    }

    fn list(&self, i: usize) -> Result<&'a [Value], ConfigError> {
        match self.get(i)? {
            Value::List(items, _) => Ok(items),
            v => semantic(&self.sub(i), v.pos(), "expected a list"),
        }
    }

    fn weight(&self, i: usize) -> Result<W, ConfigError> {
        weight(self.get(i)?, &self.sub(i))
    }

    fn space(&self, i: usize) -> Result<SpaceExpr, ConfigError> {
        space(self.get(i)?, &self.sub(i))
    }
}

fn as_node<'a>(v: &'a Value, path: &str, what: &str) -> Result<&'a Node, ConfigError> {
    match v {
        Value::Node(n) => Ok(n),
        _ => semantic(path, v.pos(), format!("expected {what}")),
    }
}

fn check_weight(w: W, path: &str, pos: Pos) -> Result<W, ConfigError> {
    match w.validate() {
        Ok(()) => Ok(w),
        Err(e) => semantic(path, pos, e.to_string()),
    }
}

fn weight(v: &Value, path: &str) -> Result<W, ConfigError> {
    let node = as_node(v, path, "a weight")?;
    let nums = |a: &Args, i: usize| -> Result<Vec<f64>, ConfigError> {
        a.list(i)?
            .iter()
            .map(|x| match x {
                Value::Num(v, _) => Ok(*v),
                _ => semantic(&a.sub(i), x.pos(), "expected a number"),
            })
            .collect()
    };
    let weights = |a: &Args, i: usize| -> Result<Vec<W>, ConfigError> {
        a.list(i)?.iter().enumerate().map(|(k, x)| weight(x, &format!("{}[{k}]", a.sub(i)))).collect()
    };
    let w = match node.name.as_str() {
        "one" => {
            Args::new(node, path, &[])?;
            W::One
        }
        "constant" => W::Constant(Args::new(node, path, &["c"])?.num(0)?),
        "power_decay" => W::PowerDecay(Args::new(node, path, &["alpha"])?.num(0)?),
        "geometric" => W::Geometric(Args::new(node, path, &["r"])?.num(0)?),
        "explicit" => {
            let a = Args::new(node, path, &["head", "tail"])?;
            W::Explicit { head: nums(&a, 0)?, tail: Box::new(a.weight(1)?) }
        }
        "interleave" => {
            let a = Args::new(node, path, &["even", "odd"])?;
            W::Interleave { even: Box::new(a.weight(0)?), odd: Box::new(a.weight(1)?) }
        }
        "lift" => {
            let a = Args::new(node, path, &["pos", "inner"])?;
            let pos = a.int(0)?;
            if pos == 0 {
                return semantic(&a.sub(0), a.get(0)?.pos(), "positions start at 1");
            }
            W::CoordinateLift { position: pos as usize - 1, inner: Box::new(a.weight(1)?) }
        }
        "product" => W::Product(weights(&Args::new(node, path, &["factors"])?, 0)?),
        "min" => W::Min(weights(&Args::new(node, path, &["factors"])?, 0)?),
        other => return semantic(path, node.pos, format!("unknown weight '{other}'")),
    };
    check_weight(w, path, node.pos)
}

fn space(v: &Value, path: &str) -> Result<SpaceExpr, ConfigError> {
    let node = as_node(v, path, "a space")?;
    let children = |a: &Args, i: usize| -> Result<Vec<SpaceExpr>, ConfigError> {
        let items = a.list(i)?;
        if items.is_empty() {
            return semantic(&a.sub(i), a.get(i)?.pos(), "at least one child is required");
        }
        items.iter().enumerate().map(|(k, x)| space(x, &format!("{}[{k}]", a.sub(i)))).collect()
    };
    Ok(match node.name.as_str() {
        "lp" => {
            Args::new(node, path, &[])?;
            SpaceExpr::Lp
        }
        "l2" => SpaceExpr::L2(Args::new(node, path, &["w"])?.weight(0)?),
        "sum_l2_lp" => SpaceExpr::SumL2Lp(Args::new(node, path, &["w"])?.weight(0)?),
        "xp" => SpaceExpr::Xp(Args::new(node, path, &["w"])?.weight(0)?),
        "schechtman" => {
            let a = Args::new(node, path, &["w", "w2"])?;
            SpaceExpr::Schechtman(a.weight(0)?, a.weight(1)?)
        }
        "yn" => {
            let a = Args::new(node, path, &["n", "w"])?;
            let n = a.int(0)?;
            if !(1..=20).contains(&n) {
                return semantic(&a.sub(0), a.get(0)?.pos(), "n must lie in 1..=20");
            }
            SpaceExpr::Yn { n: n as usize, w: a.weight(1)? }
        }
        "p2w_sum" => {
            let a = Args::new(node, path, &["children", "w"])?;
            SpaceExpr::P2wSum { children: children(&a, 0)?, w: a.weight(1)? }
        }
        "lp_sum" => SpaceExpr::LpSum(children(&Args::new(node, path, &["children"])?, 0)?),
        "tensor" => {
            let a = Args::new(node, path, &["left", "right"])?;
            SpaceExpr::Tensor(Box::new(a.space(0)?), Box::new(a.space(1)?))
        }
        "xp_alpha" => {
            let a = Args::new(node, path, &["q", "r", "L"])?;
            let as_u32 = |i: usize| -> Result<u32, ConfigError> {
                let v = a.int(i)?;
                u32::try_from(v).or_else(|_| semantic(&a.sub(i), a.get(i)?.pos(), "value too large"))
            };
            let l = if a.slots[2].is_some() { as_u32(2)? } else { 1 };
            match OrdinalDesc::new(as_u32(0)?, as_u32(1)?, l) {
                Ok(o) => SpaceExpr::XpAlpha(o),
                Err(e) => return semantic(path, node.pos, e.to_string()),
            }
        }
        "envelope" => SpaceExpr::Envelope(Box::new(Args::new(node, path, &["inner"])?.space(0)?)),
        "admissible" => {
            let a = Args::new(node, path, &["inner", "w"])?;
            let w = if a.slots[1].is_some() { Some(a.weight(1)?) } else { None };
            SpaceExpr::Admissible { inner: Box::new(a.space(0)?), w }
        }
        other => return semantic(path, node.pos, format!("unknown space '{other}'")),
    })
}

fn count(v: &Value, path: &str) -> Result<Count, ConfigError> {
    match v {
        Value::Num(x, pos) => {
            if *x < 0.0 || x.fract() != 0.0 {
                return semantic(path, *pos, "expected a count");
            }
            Ok(if *x == 0.0 { Count::Zero } else { Count::Finite(*x as u64) })
        }
        Value::Node(n) if n.args.is_empty() && n.name == "zero" => Ok(Count::Zero),
        Value::Node(n) if n.args.is_empty() && n.name == "infinite" => Ok(Count::Infinite),
        _ => semantic(path, v.pos(), "expected a number, 'zero' or 'infinite'"),
    }
}

fn profile(v: &Value, path: &str) -> Result<SizeProfile, ConfigError> {
    let node = as_node(v, path, "a profile")?;
    if node.name != "profile" {
        return semantic(path, node.pos, "expected profile(...)");
    }
    let a = Args::new(node, path, &["infinite_pieces", "finite_piece_sizes", "finite_pieces"])?;
    let sizes_v = a.get(1)?;
    let sizes_node = as_node(sizes_v, &a.sub(1), "piece sizes")?;
    let sizes = match sizes_node.name.as_str() {
        "none" => PieceSizes::None,
        "singletons" => PieceSizes::AllSingletons,
        "unbounded" => PieceSizes::Unbounded,
        "bounded" => PieceSizes::Bounded(Args::new(sizes_node, &a.sub(1), &["max"])?.int(0)?),
        other => return semantic(&a.sub(1), sizes_node.pos, format!("unknown piece sizes '{other}'")),
    };
    let p = SizeProfile {
        infinite_pieces: count(a.get(0)?, &a.sub(0))?,
        finite_piece_sizes: sizes,
        finite_pieces: count(a.get(2)?, &a.sub(2))?,
    };
    match p.validate() {
        Ok(()) => Ok(p),
        Err(e) => semantic(path, node.pos, e.to_string()),
    }
}

fn variables(v: &Value, path: &str) -> Result<Vec<ThreePoint>, ConfigError> {
    let three_point = |v: &Value, path: &str| -> Result<ThreePoint, ConfigError> {
        let node = as_node(v, path, "three_point(a, q)")?;
        if node.name != "three_point" {
            return semantic(path, node.pos, "expected three_point(a, q)");
        }
        let a = Args::new(node, path, &["a", "q"])?;
        let q = a.num(1)?;
        if !(q > 0.0 && q <= 1.0) {
            return semantic(&a.sub(1), a.get(1)?.pos(), format!("probability outside (0,1]: {q}"));
        }
        Ok(ThreePoint { a: a.num(0)?, q })
    };
    match v {
        Value::List(items, _) => {
            items.iter().enumerate().map(|(k, x)| three_point(x, &format!("{path}[{k}]"))).collect()
        }
        Value::Node(n) if n.name == "rademacher" => {
            let count = Args::new(n, path, &["count"])?.int(0)?;
            Ok(vec![ThreePoint::rademacher(); count as usize])
        }
        _ => semantic(path, v.pos(), "expected a list of three_point(a, q) or rademacher(count)"),
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let toks = lex(text)?;
    let stmts = Parser { toks, at: 0 }.document()?;
    let mut p = None;
    let mut config = Config { p: 0.0, space: None, profile: None, variables: None };
    let mut seen: Vec<&str> = Vec::new();
    for (key, pos, value) in &stmts {
        if seen.contains(&key.as_str()) {
            return semantic(key, *pos, format!("'{key}' declared more than once"));
        }
        seen.push(key);
        match key.as_str() {
            "p" => match value {
                Value::Num(v, vp) => {
                    if !(*v > 2.0) {
                        return semantic("p", *vp, Error::InvalidExponent(*v).to_string());
                    }
                    p = Some(*v);
                }
                _ => return semantic("p", value.pos(), "expected a number"),
            },
            "space" => config.space = Some(space(value, "space")?),
            "profile" => config.profile = Some(profile(value, "profile")?),
            "variables" => config.variables = Some(variables(value, "variables")?),
            other => return semantic(other, *pos, format!("unknown statement '{other}'")),
        }
    }
    config.p = match p {
        Some(p) => p,
        None => return semantic("p", Pos { line: 1, col: 1 }, "the exponent p must be declared"),
    };
    if let Some(s) = &config.space {
        // surface builder errors (arity, admissibility) at parse time
        s.build_at(config.p, "space").map_err(|(path, msg)| ConfigError::Semantic {
            path,
            pos: stmts.iter().find(|s| s.0 == "space").map(|s| s.2.pos()).unwrap_or(Pos { line: 1, col: 1 }),
            msg,
        })?;
    }
    Ok(config)
}

impl SpaceExpr {
    pub fn build(&self, p: f64) -> pwnorm::Result<Family> {
        match self {
            SpaceExpr::Lp => spaces::make_lp(p),
            SpaceExpr::L2(w) => spaces::make_l2(p, w.clone()),
            SpaceExpr::SumL2Lp(w) => spaces::make_sum_l2_lp(p, w.clone()),
            SpaceExpr::Xp(w) => spaces::make_rosenthal_xp(p, w.clone()),
            SpaceExpr::Schechtman(w, w2) => spaces::make_schechtman(p, w.clone(), w2.clone()),
            SpaceExpr::Yn { n, w } => spaces::make_yn(p, *n, w.clone()),
            SpaceExpr::P2wSum { children, w } => {
                spaces::p2w_sum(children.iter().map(|c| c.build(p)).collect::<pwnorm::Result<_>>()?, w.clone())
            }
            SpaceExpr::LpSum(children) => {
                spaces::lp_sum(children.iter().map(|c| c.build(p)).collect::<pwnorm::Result<_>>()?)
            }
            SpaceExpr::Tensor(l, r) => spaces::tensor_family(l.build(p)?, r.build(p)?),
            SpaceExpr::XpAlpha(o) => spaces::xp_alpha(p, *o),
            SpaceExpr::Envelope(inner) => Ok(Family::envelope(inner.build(p)?)),
            SpaceExpr::Admissible { inner, w } => spaces::make_admissible(&inner.build(p)?, w.clone()),
        }
    }

    /// Like `build`, reporting the path of the innermost failing node.
    fn build_at(&self, p: f64, path: &str) -> Result<Family, (String, String)> {
        let kids = |children: &[SpaceExpr], key: &str| -> Result<Vec<Family>, (String, String)> {
            children.iter().enumerate().map(|(k, c)| c.build_at(p, &format!("{path}.{key}[{k}]"))).collect()
        };
        let here = |r: pwnorm::Result<Family>| r.map_err(|e| (path.to_string(), e.to_string()));
        match self {
            SpaceExpr::P2wSum { children, w } => here(spaces::p2w_sum(kids(children, "children")?, w.clone())),
            SpaceExpr::LpSum(children) => here(spaces::lp_sum(kids(children, "children")?)),
            SpaceExpr::Tensor(l, r) => here(spaces::tensor_family(
                l.build_at(p, &format!("{path}.left"))?,
                r.build_at(p, &format!("{path}.right"))?,
            )),
            SpaceExpr::Envelope(inner) => Ok(Family::envelope(inner.build_at(p, &format!("{path}.inner"))?)),
            SpaceExpr::Admissible { inner, w } => {
                here(spaces::make_admissible(&inner.build_at(p, &format!("{path}.inner"))?, w.clone()))
            }
            _ => here(self.build(p)),
        }
    }
}

// ---------------------------------------------------------------- printer

fn num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

fn write_list<T>(f: &mut fmt::Formatter<'_>, items: &[T], mut each: impl FnMut(&mut fmt::Formatter<'_>, &T) -> fmt::Result) -> fmt::Result {
    write!(f, "[")?;
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        each(f, it)?;
    }
    write!(f, "]")
}

impl fmt::Display for SpaceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceExpr::Lp => write!(f, "lp"),
            SpaceExpr::L2(w) => write!(f, "l2(w = {})", Weight(w)),
            SpaceExpr::SumL2Lp(w) => write!(f, "sum_l2_lp(w = {})", Weight(w)),
            SpaceExpr::Xp(w) => write!(f, "xp(w = {})", Weight(w)),
            SpaceExpr::Schechtman(w, w2) => write!(f, "schechtman(w = {}, w2 = {})", Weight(w), Weight(w2)),
            SpaceExpr::Yn { n, w } => write!(f, "yn(n = {n}, w = {})", Weight(w)),
            SpaceExpr::P2wSum { children, w } => {
                write!(f, "p2w_sum(children = ")?;
                write_list(f, children, |f, c| write!(f, "{c}"))?;
                write!(f, ", w = {})", Weight(w))
            }
            SpaceExpr::LpSum(children) => {
                write!(f, "lp_sum(children = ")?;
                write_list(f, children, |f, c| write!(f, "{c}"))?;
                write!(f, ")")
            }
            SpaceExpr::Tensor(l, r) => write!(f, "tensor(left = {l}, right = {r})"),
            SpaceExpr::XpAlpha(o) => write!(f, "xp_alpha(q = {}, r = {}, L = {})", o.q, o.r, o.limit_truncation),
            SpaceExpr::Envelope(inner) => write!(f, "envelope(inner = {inner})"),
            SpaceExpr::Admissible { inner, w: None } => write!(f, "admissible(inner = {inner})"),
            SpaceExpr::Admissible { inner, w: Some(w) } => {
                write!(f, "admissible(inner = {inner}, w = {})", Weight(w))
            }
        }
    }
}

/// Weight printer with integers written without a fractional part.
struct Weight<'a>(&'a W);

impl fmt::Display for Weight<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            W::One => write!(f, "one"),
            W::Constant(c) => write!(f, "constant(c = {})", num(*c)),
            W::PowerDecay(a) => write!(f, "power_decay(alpha = {})", num(*a)),
            W::Geometric(r) => write!(f, "geometric(r = {})", num(*r)),
            W::Explicit { head, tail } => {
                write!(f, "explicit(head = ")?;
                write_list(f, head, |f, h| write!(f, "{}", num(*h)))?;
                write!(f, ", tail = {})", Weight(tail))
            }
            W::Interleave { even, odd } => write!(f, "interleave(even = {}, odd = {})", Weight(even), Weight(odd)),
            W::CoordinateLift { position, inner } => write!(f, "lift(pos = {}, inner = {})", position + 1, Weight(inner)),
            W::Product(fs) => {
                write!(f, "product(factors = ")?;
                write_list(f, fs, |f, w| write!(f, "{}", Weight(w)))?;
                write!(f, ")")
            }
            W::Min(fs) => {
                write!(f, "min(factors = ")?;
                write_list(f, fs, |f, w| write!(f, "{}", Weight(w)))?;
                write!(f, ")")
            }
        }
    }
}

fn count_str(c: Count) -> String {
    match c {
        Count::Zero => "zero".into(),
        Count::Finite(n) => n.to_string(),
        Count::Infinite => "infinite".into(),
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p = {}", num(self.p))?;
        if let Some(s) = &self.space {
            writeln!(f, "space = {s}")?;
        }
        if let Some(pr) = &self.profile {
            let sizes = match pr.finite_piece_sizes {
                PieceSizes::None => "none".to_string(),
                PieceSizes::AllSingletons => "singletons".to_string(),
                PieceSizes::Bounded(m) => format!("bounded(max = {m})"),
                PieceSizes::Unbounded => "unbounded".to_string(),
            };
            writeln!(
                f,
                "profile = profile(infinite_pieces = {}, finite_piece_sizes = {sizes}, finite_pieces = {})",
                count_str(pr.infinite_pieces),
                count_str(pr.finite_pieces)
            )?;
        }
        if let Some(vars) = &self.variables {
            write!(f, "variables = ")?;
            write_list(f, vars, |f, v| write!(f, "three_point(a = {}, q = {})", num(v.a), num(v.q)))?;
            writeln!(f)?;
        }
        Ok(())
    }
}
