//! UAI `MARKOV` network format.
//!
//! ```text
//! MARKOV
//! <number of variables>
//! <cardinality of each variable>
//! <number of factors>
//! <scope size> <var> [<var>]     (one line per factor)
//! <table size>                   (one block per factor, same order)
//! <values ...>
//! ```
//!
//! Tables list entries with the last scope variable changing fastest, which
//! is the same layout [`Factor`] uses.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Factor, GraphicalModel, CARDINALITY};

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

struct Tokens<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: (usize, usize),
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut tokens = Vec::new();
        let mut end = (1, 1);
        for (li, line) in text.lines().enumerate() {
            let mut rest = line;
            let mut offset = 0;
            while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
                let after = &rest[start..];
                let len = after.find(char::is_whitespace).unwrap_or(after.len());
                tokens.push(Token {
                    text: &after[..len],
                    line: li + 1,
                    column: line[..offset + start].chars().count() + 1,
                });
                offset += start + len;
                rest = &after[len..];
            }
            end = (li + 1, line.chars().count() + 1);
        }
        Self { tokens, pos: 0, end }
    }

    fn next(&mut self, what: &str) -> Result<&Token<'a>> {
        match self.tokens.get(self.pos) {
            Some(_) => {
                self.pos += 1;
                Ok(&self.tokens[self.pos - 1])
            }
            None => Err(Error::Parse {
                line: self.end.0,
                column: self.end.1,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn usize(&mut self, what: &str) -> Result<(usize, usize, usize)> {
        let tok = self.next(what)?;
        let value = tok.text.parse::<usize>().map_err(|_| Error::Parse {
            line: tok.line,
            column: tok.column,
            message: format!("expected {what}, found `{}`", tok.text),
        })?;
        Ok((value, tok.line, tok.column))
    }

    fn f64(&mut self, what: &str) -> Result<(f64, usize, usize)> {
        let tok = self.next(what)?;
        let value = tok.text.parse::<f64>().map_err(|_| Error::Parse {
            line: tok.line,
            column: tok.column,
            message: format!("expected {what}, found `{}`", tok.text),
        })?;
        Ok((value, tok.line, tok.column))
    }
}

/// Parses a UAI `MARKOV` file into a model with binary variables.
pub fn read_uai(text: &str) -> Result<GraphicalModel> {
    let mut toks = Tokens::new(text);
    let header = toks.next("network type")?;
    if header.text != "MARKOV" {
        return Err(Error::Parse {
            line: header.line,
            column: header.column,
            message: format!("expected `MARKOV`, found `{}`", header.text),
        });
    }

    let (n, _, _) = toks.usize("variable count")?;
    let mut model = GraphicalModel::new();
    for i in 0..n {
        let (card, _, _) = toks.usize("cardinality")?;
        if card != CARDINALITY {
            return Err(Error::UnsupportedCardinality {
                variable: i,
                cardinality: card,
            });
        }
        model.add_variable(format!("x{i}"));
    }

    let (m, _, _) = toks.usize("factor count")?;
    let mut scopes = Vec::with_capacity(m);
    for _ in 0..m {
        let (arity, line, column) = toks.usize("scope size")?;
        if arity == 0 || arity > 2 {
            return Err(Error::Parse {
                line,
                column,
                message: format!("factor scope size {arity} is not supported (expected 1 or 2)"),
            });
        }
        let mut scope = Vec::with_capacity(arity);
        for _ in 0..arity {
            let (v, line, column) = toks.usize("variable index")?;
            if v >= n {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("variable index {v} out of range (model has {n})"),
                });
            }
            scope.push(v);
        }
        scopes.push(scope);
    }

    for scope in scopes {
        let expected = CARDINALITY.pow(scope.len() as u32);
        let (size, line, column) = toks.usize("table size")?;
        if size != expected {
            return Err(Error::Parse {
                line,
                column,
                message: format!("table size {size} does not match scope (expected {expected})"),
            });
        }
        let mut values = Vec::with_capacity(size);
        for _ in 0..size {
            let (v, line, column) = toks.f64("table value")?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("invalid factor value {v}"),
                });
            }
            values.push(v);
        }
        let factor = Factor::new(scope, values).map_err(|e| Error::Parse {
            line,
            column,
            message: e.to_string(),
        })?;
        model.add_factor(factor);
    }

    if let Some(extra) = toks.tokens.get(toks.pos) {
        return Err(Error::Parse {
            line: extra.line,
            column: extra.column,
            message: format!("unexpected trailing token `{}`", extra.text),
        });
    }
    model.mark_isolated();
    Ok(model)
}

/// Serializes a model. Values use the shortest representation that parses
/// back to the same `f64`.
pub fn write_uai(model: &GraphicalModel) -> String {
    let mut out = String::new();
    out.push_str("MARKOV\n");
    let _ = writeln!(out, "{}", model.num_variables());
    let cards: Vec<String> = model.variables.iter().map(|v| v.cardinality.to_string()).collect();
    let _ = writeln!(out, "{}", cards.join(" "));
    let _ = writeln!(out, "{}", model.factors.len());
    for f in &model.factors {
        let scope: Vec<String> = f.scope().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} {}", f.arity(), scope.join(" "));
    }
    for f in &model.factors {
        out.push('\n');
        let _ = writeln!(out, "{}", f.values().len());
        let values: Vec<String> = f.values().iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out
}
