//! Minimal INI reader: `[section]` headers, `key = value` lines, `#`/`;`
//! comments. Every entry keeps its line number for error reporting.

use std::collections::HashSet;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

pub(crate) fn parse(text: &str) -> Result<Vec<Section>, CliError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut names = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::config(line, "unterminated section header"))?
                .trim()
                .to_string();
            if name.is_empty() {
                return Err(CliError::config(line, "empty section name"));
            }
            if !names.insert(name.clone()) {
                return Err(CliError::config(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| CliError::config(line, format!("expected `key = value`, got {body:?}")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::config(line, "empty key"));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| CliError::config(line, format!("key `{key}` outside any section")))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(CliError::config(
                line,
                format!("duplicate key `{key}` in [{}]", section.name),
            ));
        }
        section.entries.push(Entry {
            key,
            value: strip_inline_comment(value).trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

fn strip_inline_comment(v: &str) -> &str {
    match v.find([';', '#']) {
        Some(i) if i == 0 || v[..i].ends_with(char::is_whitespace) => &v[..i],
        _ => v,
    }
}
