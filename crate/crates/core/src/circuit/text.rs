//! Plain-text circuit format, one gate per line.
//!
//! ```text
//! qcomb-circuit 1
//! qubits 4 params 54
//! fixed H t=1 c=-
//! fixed X t=3 c=2c m=0.0,0.0;1.0,0.0;1.0,0.0;0.0,0.0
//! rot Z t=0 c=- p=7
//! block G t=0,1,2 c=- qubits=3 params=0 {
//!   ...
//! }
//! ```
//!
//! * `t=` lists target wires, most significant first.
//! * `c=` is `-` or comma-separated controls `<wire><o|c>` (open/closed).
//! * `m=` is the row-major matrix as `re,im` pairs joined by `;`, printed
//!   with round-trip precision. It may be omitted for `H X Y Z -Z`.
//! * `p=` is the index into the shared parameter vector.
//! * Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{gates, Axis, Circuit, Control, Gate, GateKind, Polarity};
use crate::qmath::{ComplexMatrix, C64};
use crate::{Error, Result};

const MAGIC: &str = "qcomb-circuit 1";

pub fn to_text(c: &Circuit) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "qubits {} params {}", c.num_qubits(), c.num_params());
    write_gates(&mut out, c, 0);
    out
}

fn write_gates(out: &mut String, c: &Circuit, indent: usize) {
    let pad = "  ".repeat(indent);
    for g in c.gates() {
        let targets = join(g.targets.iter());
        let controls = if g.controls.is_empty() {
            "-".to_string()
        } else {
            g.controls
                .iter()
                .map(|c| format!("{}{}", c.qubit, if c.polarity == Polarity::Open { 'o' } else { 'c' }))
                .collect::<Vec<_>>()
                .join(",")
        };
        match &g.kind {
            GateKind::Fixed { name, matrix } => {
                let _ = write!(out, "{pad}fixed {name} t={targets} c={controls}");
                if standard(name).as_ref() != Some(matrix) {
                    let entries: Vec<String> =
                        matrix.data().iter().map(|z| format!("{:?},{:?}", z.re, z.im)).collect();
                    let _ = write!(out, " m={}", entries.join(";"));
                }
                out.push('\n');
            }
            GateKind::Rotation { axis, param } => {
                let _ = writeln!(out, "{pad}rot {} t={targets} c={controls} p={param}", axis.symbol());
            }
            GateKind::Block { name, circuit } => {
                let _ = writeln!(
                    out,
                    "{pad}block {name} t={targets} c={controls} qubits={} params={} {{",
                    circuit.num_qubits(),
                    circuit.num_params()
                );
                write_gates(out, circuit, indent + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

fn join<T: ToString>(it: impl Iterator<Item = T>) -> String {
    it.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn standard(name: &str) -> Option<ComplexMatrix> {
    Some(match name {
        "H" => gates::h(),
        "X" => gates::x(),
        "Y" => gates::y(),
        "Z" => gates::z(),
        "-Z" => gates::neg_z(),
        _ => return None,
    })
}

pub fn from_text(src: &str) -> Result<Circuit> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, first) = lines.next().ok_or(Error::Parse { line: 0, msg: "empty input".into() })?;
    if first != MAGIC {
        return Err(Error::Parse { line: ln, msg: format!("expected `{MAGIC}`") });
    }
    let (ln, header) = lines.next().ok_or(Error::Parse { line: ln, msg: "missing header".into() })?;
    let (qubits, params) = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["qubits", q, "params", p] => (num(q, ln)?, num(p, ln)?),
        _ => return Err(Error::Parse { line: ln, msg: "expected `qubits <n> params <p>`".into() }),
    };
    let mut lines = lines.peekable();
    let c = parse_body(&mut lines, qubits, params, false)?;
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse { line: ln, msg: "trailing input".into() });
    }
    Ok(c)
}

fn parse_body<'a, I: Iterator<Item = (usize, &'a str)>>(
    lines: &mut std::iter::Peekable<I>,
    qubits: usize,
    params: usize,
    nested: bool,
) -> Result<Circuit> {
    let mut c = Circuit::new(qubits);
    c.reserve_params(params);
    loop {
        let Some((ln, line)) = lines.next() else {
            if nested {
                return Err(Error::Parse { line: 0, msg: "unterminated block".into() });
            }
            return Ok(c);
        };
        if line == "}" {
            if nested {
                return Ok(c);
            }
            return Err(Error::Parse { line: ln, msg: "unmatched `}`".into() });
        }
        let err = |msg: String| Error::Parse { line: ln, msg };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err(err("too few fields".into()));
        }
        let field = |key: &str| -> Option<&str> {
            tokens.iter().find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        };
        let targets: Vec<usize> = field("t")
            .ok_or_else(|| err("missing t=".into()))?
            .split(',')
            .map(|s| num(s, ln))
            .collect::<Result<_>>()?;
        let controls = parse_controls(field("c").ok_or_else(|| err("missing c=".into()))?, ln)?;
        let gate = match tokens[0] {
            "fixed" => {
                let name = tokens[1];
                let matrix = match field("m") {
                    Some(m) => parse_matrix(m, ln)?,
                    None => standard(name).ok_or_else(|| err(format!("`{name}` needs m=")))?,
                };
                Gate::fixed(name, matrix, targets)
            }
            "rot" => {
                let axis = match tokens[1] {
                    "X" => Axis::X,
                    "Y" => Axis::Y,
                    "Z" => Axis::Z,
                    other => return Err(err(format!("unknown axis `{other}`"))),
                };
                let p = num(field("p").ok_or_else(|| err("missing p=".into()))?, ln)?;
                if targets.len() != 1 {
                    return Err(err("rotation takes one target".into()));
                }
                Gate::rotation(axis, p, targets[0])
            }
            "block" => {
                if tokens.last() != Some(&"{") {
                    return Err(err("block line must end with `{`".into()));
                }
                let q = num(field("qubits").ok_or_else(|| err("missing qubits=".into()))?, ln)?;
                let p = num(field("params").ok_or_else(|| err("missing params=".into()))?, ln)?;
                let sub = parse_body(lines, q, p, true)?;
                Gate::block(tokens[1], sub, targets)
            }
            other => return Err(err(format!("unknown gate kind `{other}`"))),
        };
        c.push(gate.with_controls(controls)).map_err(|e| err(e.to_string()))?;
    }
}

fn num(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer `{s}`") })
}

fn parse_controls(s: &str, line: usize) -> Result<Vec<Control>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            let (q, pol) = tok.split_at(tok.len().saturating_sub(1));
            let qubit = num(q, line)?;
            match pol {
                "o" => Ok(Control::open(qubit)),
                "c" => Ok(Control::closed(qubit)),
                _ => Err(Error::Parse { line, msg: format!("bad control `{tok}`") }),
            }
        })
        .collect()
}

fn parse_matrix(s: &str, line: usize) -> Result<ComplexMatrix> {
    let bad = |msg: String| Error::Parse { line, msg };
    let entries: Vec<C64> = s
        .split(';')
        .map(|pair| {
            let (re, im) = pair.split_once(',').ok_or_else(|| bad(format!("bad entry `{pair}`")))?;
            let re: f64 = re.parse().map_err(|_| bad(format!("bad float `{re}`")))?;
            let im: f64 = im.parse().map_err(|_| bad(format!("bad float `{im}`")))?;
            Ok(C64::new(re, im))
        })
        .collect::<Result<_>>()?;
    let d = (entries.len() as f64).sqrt().round() as usize;
    if d * d != entries.len() {
        return Err(bad(format!("{} entries is not a square matrix", entries.len())));
    }
    ComplexMatrix::from_vec(d, d, entries)
}
