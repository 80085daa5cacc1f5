//! MDP spec files: a JSON object with keys `S`, `A`, `H`, `mu1`, `P`, `r`.

use std::path::Path;

use super::{validate_mdp, MdpSpec, PathItem, TabularMdp};
use crate::error::{Error, Result};

pub fn load_mdp_file(path: impl AsRef<Path>) -> Result<TabularMdp> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        context: "reading MDP file",
        path: path.to_path_buf(),
        source,
    })?;
    parse_mdp_str(&text, &path.display().to_string())
}

/// Parses and validates; the first violation is reported with the line of
/// the offending value.
pub fn parse_mdp_str(text: &str, origin: &str) -> Result<TabularMdp> {
    let spec: MdpSpec = serde_json::from_str(text).map_err(|e| Error::MdpFile {
        path: origin.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let report = validate_mdp(&spec);
    if let Some(first) = report.violations.first() {
        let line = locate_line(text, &first.json_path()).unwrap_or(1);
        let message = if report.violations.len() > 1 {
            format!("{first} (+{} more)", report.violations.len() - 1)
        } else {
            first.to_string()
        };
        return Err(Error::MdpFile {
            path: origin.to_string(),
            line,
            message,
        });
    }
    TabularMdp::from_spec(&spec)
}

enum Frame {
    Object { key: Option<String>, expecting_key: bool },
    Array { index: usize },
}

fn current_path(stack: &[Frame]) -> Vec<PathItem> {
    stack
        .iter()
        .filter_map(|f| match f {
            Frame::Object { key, .. } => key.clone().map(PathItem::Key),
            Frame::Array { index } => Some(PathItem::Index(*index)),
        })
        .collect()
}

/// Line (1-based) where the value at `target` begins in well-formed JSON.
pub(crate) fn locate_line(text: &str, target: &[PathItem]) -> Option<usize> {
    if target.is_empty() {
        return None;
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut line = 1;
    let mut value_pending = true;
    let mut chars = text.chars();

    macro_rules! value_start {
        () => {
            if value_pending && current_path(&stack) == target {
                return Some(line);
            }
        };
    }

    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            '{' => {
                value_start!();
                stack.push(Frame::Object {
                    key: None,
                    expecting_key: true,
                });
            }
            '[' => {
                value_start!();
                stack.push(Frame::Array { index: 0 });
                value_pending = true;
            }
            '}' | ']' => {
                stack.pop();
                value_pending = false;
            }
            ',' => match stack.last_mut() {
                Some(Frame::Array { index }) => {
                    *index += 1;
                    value_pending = true;
                }
                Some(Frame::Object { expecting_key, .. }) => *expecting_key = true,
                None => {}
            },
            ':' => value_pending = true,
            '"' => {
                let mut buf = String::new();
                let mut escaped = false;
                for sc in chars.by_ref() {
                    if escaped {
                        buf.push(sc);
                        escaped = false;
                    } else if sc == '\\' {
                        escaped = true;
                    } else if sc == '"' {
                        break;
                    } else {
                        buf.push(sc);
                    }
                }
                if let Some(Frame::Object {
                    key,
                    expecting_key: expecting @ true,
                }) = stack.last_mut()
                {
                    *key = Some(buf);
                    *expecting = false;
                } else {
                    value_start!();
                }
            }
            _ => value_start!(),
        }
    }
    None
}
