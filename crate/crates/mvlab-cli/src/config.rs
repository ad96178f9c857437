//! Experiment-configuration ingestion.
//!
//! Configs are strict JSON: unknown keys are rejected with their line and
//! column, duplicate keys are rejected (last-wins silence would let a typo
//! switch an experiment), and the seed is mandatory — a run without a seed
//! cannot be reproduced, so it is not allowed to exist.  A hand-rolled
//! scanner enforces the positional rules (serde reports unknown fields but
//! loses positions inside nested enums and says nothing about duplicates);
//! typed decoding then goes through serde against the same schema.

use std::fmt;
use std::path::Path;

use mvlab_core::{Model, ModelDocument, Result as CoreResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Experiment kinds.  Serialized in kebab-case; the CLI subcommands, the
/// output-directory prefix, and the manifest all use the same names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    FixedPoint,
    PocSweep,
    UniformSweep,
    Tails,
    Chaos,
    Bounds,
    Validate,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Simulate,
        Kind::FixedPoint,
        Kind::PocSweep,
        Kind::UniformSweep,
        Kind::Tails,
        Kind::Chaos,
        Kind::Bounds,
        Kind::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::FixedPoint => "fixed-point",
            Kind::PocSweep => "poc-sweep",
            Kind::UniformSweep => "uniform-sweep",
            Kind::Tails => "tails",
            Kind::Chaos => "chaos",
            Kind::Bounds => "bounds",
            Kind::Validate => "validate",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model reference: either a builtin family name (defaults filled in) or an
/// inline document overriding any subset of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Inline(ModelDocument),
}

impl Default for ModelRef {
    fn default() -> Self {
        ModelRef::Name("mean-field-gaussian".into())
    }
}

impl ModelRef {
    /// The fully-populated document form (manifests store this).
    pub fn document(&self) -> ModelDocument {
        match self {
            ModelRef::Name(name) => ModelDocument {
                family: name.clone(),
                ..ModelDocument::default()
            },
            ModelRef::Inline(doc) => doc.clone(),
        }
    }

    pub fn to_spec(&self) -> CoreResult<Model> {
        self.document().to_spec()
    }
}

fn default_replicates() -> u64 {
    16
}

fn default_outdir() -> String {
    "runs".into()
}

/// One experiment request.  `particles` is the N grid, `steps` the time
/// grid, `eps` the accuracy grid; a kind reads only the grids it needs and
/// `validate_grids` requires those to be nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub model: ModelRef,
    #[serde(default)]
    pub particles: Vec<u64>,
    #[serde(default)]
    pub steps: Vec<u64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    pub seed: u64,
    #[serde(default = "default_outdir")]
    pub outdir: String,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{col}: {msg}")]
    Syntax {
        origin: String,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{origin}: {msg}")]
    Schema { origin: String, msg: String },
}

/// Parse and validate a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: origin.clone(),
        source,
    })?;
    parse_config_str(&text, &origin)
}

/// Parse a config from text; `origin` labels error positions.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
    strict_scan(text).map_err(|(line, col, msg)| ConfigError::Syntax {
        origin: origin.into(),
        line,
        col,
        msg,
    })?;
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            origin: origin.into(),
            line: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })?;
    cfg.validate_grids()
        .map_err(|msg| ConfigError::Schema {
            origin: origin.into(),
            msg,
        })?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Grid/count requirements per kind.  Names the offending field.
    pub fn validate_grids(&self) -> Result<(), String> {
        let need = |name: &str, ok: bool| -> Result<(), String> {
            if ok {
                Ok(())
            } else {
                Err(format!(
                    "kind `{}` requires a nonempty `{name}` grid",
                    self.kind
                ))
            }
        };
        let (particles, steps, eps) = match self.kind {
            Kind::Validate => (false, false, false),
            Kind::FixedPoint => (true, false, false),
            Kind::Simulate | Kind::PocSweep | Kind::UniformSweep | Kind::Chaos => {
                (true, true, false)
            }
            Kind::Bounds => (true, false, true),
            Kind::Tails => (true, true, true),
        };
        if particles {
            need("particles", !self.particles.is_empty())?;
        }
        if steps {
            need("steps", !self.steps.is_empty())?;
        }
        if eps {
            need("eps", !self.eps.is_empty())?;
        }
        if self.particles.contains(&0) {
            return Err("`particles` entries must be >= 1".into());
        }
        if self.kind == Kind::FixedPoint && self.particles.iter().max() < Some(&2) {
            return Err("kind `fixed-point` needs max `particles` >= 2 for the floor estimate".into());
        }
        if self.eps.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err("`eps` entries must be finite and > 0".into());
        }
        let uses_replicates = matches!(
            self.kind,
            Kind::Simulate | Kind::PocSweep | Kind::UniformSweep | Kind::Tails | Kind::Chaos
        );
        if uses_replicates && self.replicates == 0 {
            return Err(format!("kind `{}` requires `replicates` >= 1", self.kind));
        }
        if self.kind == Kind::Tails && self.steps.iter().max() == Some(&0) {
            return Err("kind `tails` requires a positive inspection step".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Strict positional scan.

/// Object contexts the schema knows about.  Objects anywhere else (inside
/// grids, matrix rows, …) are structural errors.
#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Root,
    Model,
    Initial,
    Free,
}

fn allowed_keys(ctx: Ctx) -> Option<&'static [&'static str]> {
    match ctx {
        Ctx::Root => Some(&[
            "kind",
            "model",
            "particles",
            "steps",
            "eps",
            "replicates",
            "seed",
            "outdir",
        ]),
        Ctx::Model => Some(&[
            "family",
            "dim",
            "contraction",
            "mat_a",
            "delta",
            "kappa",
            "noise_scale",
            "initial",
            "alpha",
            "gamma0",
            "gamma_rate",
        ]),
        Ctx::Initial => Some(&["kind", "level", "sd", "shift_sd"]),
        Ctx::Free => None,
    }
}

fn child_ctx(ctx: Ctx, key: &str) -> Ctx {
    match (ctx, key) {
        (Ctx::Root, "model") => Ctx::Model,
        (Ctx::Model, "initial") => Ctx::Initial,
        _ => Ctx::Free,
    }
}

type ScanError = (usize, usize, String);

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner {
            bytes: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ScanError {
        (self.line, self.col, msg.into())
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if b & 0xC0 != 0x80 {
            // UTF-8 continuation bytes do not advance the column.
            self.col += 1;
        }
        Some(b)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.bump();
        }
    }

    fn expect(&mut self, want: u8) -> Result<(), ScanError> {
        match self.peek() {
            Some(b) if b == want => {
                self.bump();
                Ok(())
            }
            Some(b) => Err(self.err(format!(
                "expected `{}`, found `{}`",
                want as char, b as char
            ))),
            None => Err(self.err(format!("expected `{}`, found end of input", want as char))),
        }
    }

    /// Raw string contents (escapes skipped, not decoded: schema keys are
    /// plain identifiers, so an escaped spelling of one counts as unknown).
    fn string(&mut self) -> Result<String, ScanError> {
        self.expect(b'"')?;
        let mut out = Vec::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some(b'"') => break,
                Some(b'\\') => {
                    out.push(b'\\');
                    match self.bump() {
                        None => return Err(self.err("unterminated escape")),
                        Some(c) => out.push(c),
                    }
                }
                Some(c) => out.push(c),
            }
        }
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    fn value(&mut self, ctx: Ctx) -> Result<(), ScanError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("expected a value, found end of input")),
            Some(b'{') => self.object(ctx),
            Some(b'[') => self.array(),
            Some(b'"') => self.string().map(|_| ()),
            Some(_) => {
                // Number / true / false / null: structure only; serde types it.
                while let Some(b) = self.peek() {
                    if matches!(b, b',' | b']' | b'}' | b' ' | b'\t' | b'\n' | b'\r') {
                        break;
                    }
                    self.bump();
                }
                Ok(())
            }
        }
    }

    fn array(&mut self) -> Result<(), ScanError> {
        self.expect(b'[')?;
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.bump();
            return Ok(());
        }
        loop {
            // Elements never open a schema context of their own.
            self.value(Ctx::Free)?;
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                    self.skip_ws();
                }
                Some(b']') => {
                    self.bump();
                    return Ok(());
                }
                _ => return Err(self.err("expected `,` or `]` in array")),
            }
        }
    }

    fn object(&mut self, ctx: Ctx) -> Result<(), ScanError> {
        if allowed_keys(ctx).is_none() {
            return Err(self.err("unexpected object: no nested objects here"));
        }
        self.expect(b'{')?;
        let mut seen: Vec<String> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.bump();
            return Ok(());
        }
        loop {
            self.skip_ws();
            let key_line = self.line;
            let key_col = self.col;
            let key = self.string()?;
            if let Some(allowed) = allowed_keys(ctx) {
                if !allowed.iter().any(|&k| k == key) {
                    return Err((key_line, key_col, format!("unknown key `{key}`")));
                }
            }
            if seen.contains(&key) {
                return Err((key_line, key_col, format!("duplicate key `{key}`")));
            }
            seen.push(key.clone());
            self.skip_ws();
            self.expect(b':')?;
            self.value(child_ctx(ctx, &key))?;
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.bump();
                }
                Some(b'}') => {
                    self.bump();
                    return Ok(());
                }
                _ => return Err(self.err("expected `,` or `}` in object")),
            }
        }
    }
}

/// Positional strictness pass: duplicate keys and unknown keys anywhere in
/// the document are rejected with their line and column.
fn strict_scan(text: &str) -> Result<(), ScanError> {
    let mut s = Scanner::new(text);
    s.skip_ws();
    if s.peek() != Some(b'{') {
        return Err(s.err("config must be a JSON object"));
    }
    s.object(Ctx::Root)?;
    s.skip_ws();
    if s.peek().is_some() {
        return Err(s.err("trailing content after config object"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = parse_config_str(r#"{"kind": "validate", "seed": 7}"#, "t").unwrap();
        assert_eq!(cfg.kind, Kind::Validate);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.replicates, 16);
        assert_eq!(cfg.outdir, "runs");
        assert_eq!(cfg.model, ModelRef::default());
        assert!(cfg.particles.is_empty());
        let doc = cfg.model.document();
        assert_eq!(doc.family, "mean-field-gaussian");
        assert_eq!(doc.delta, 0.1);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let err = parse_config_str(r#"{"kind": "validate"}"#, "t").unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn duplicate_key_rejected_with_position() {
        let text = "{\n  \"kind\": \"validate\",\n  \"seed\": 1,\n  \"seed\": 2\n}";
        match parse_config_str(text, "t").unwrap_err() {
            ConfigError::Syntax { line, col, msg, .. } => {
                assert_eq!((line, col), (4, 3));
                assert!(msg.contains("duplicate key `seed`"), "{msg}");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_position() {
        let text = "{\"kind\": \"validate\", \"seed\": 1,\n    \"sede\": 2}";
        match parse_config_str(text, "t").unwrap_err() {
            ConfigError::Syntax { line, col, msg, .. } => {
                assert_eq!((line, col), (2, 5));
                assert!(msg.contains("unknown key `sede`"), "{msg}");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn unknown_model_key_rejected_inside_nested_object() {
        let text = r#"{"kind": "validate", "seed": 1, "model": {"family": "mean-field-gaussian", "detla": 0.2}}"#;
        let err = parse_config_str(text, "t").unwrap_err();
        assert!(err.to_string().contains("unknown key `detla`"), "{err}");
    }

    #[test]
    fn empty_grid_rejected_naming_the_field() {
        let text = r#"{"kind": "poc-sweep", "seed": 1, "particles": [], "steps": [10]}"#;
        let err = parse_config_str(text, "t").unwrap_err();
        assert!(err.to_string().contains("`particles`"), "{err}");
        let text = r#"{"kind": "poc-sweep", "seed": 1, "particles": [100]}"#;
        let err = parse_config_str(text, "t").unwrap_err();
        assert!(err.to_string().contains("`steps`"), "{err}");
    }

    #[test]
    fn model_accepts_name_or_inline_document() {
        let by_name = parse_config_str(
            r#"{"kind": "validate", "seed": 1, "model": "mean-field-bounded"}"#,
            "t",
        )
        .unwrap();
        let inline = parse_config_str(
            r#"{"kind": "validate", "seed": 1,
                "model": {"family": "mean-field-bounded", "delta": 0.05,
                          "initial": {"kind": "gaussian", "level": 1.0, "sd": 0.5}}}"#,
            "t",
        )
        .unwrap();
        assert_eq!(by_name.model.document().family, "mean-field-bounded");
        let doc = inline.model.document();
        assert_eq!(doc.delta, 0.05);
        assert!(by_name.model.to_spec().is_ok());
        assert!(inline.model.to_spec().is_ok());
    }

    #[test]
    fn grid_requirements_differ_by_kind() {
        let tails_no_eps = r#"{"kind": "tails", "seed": 1, "particles": [100], "steps": [10]}"#;
        assert!(parse_config_str(tails_no_eps, "t").is_err());
        let bounds = r#"{"kind": "bounds", "seed": 1, "particles": [100], "eps": [0.5]}"#;
        assert!(parse_config_str(bounds, "t").is_ok());
        let zero_eps = r#"{"kind": "bounds", "seed": 1, "particles": [100], "eps": [0.0]}"#;
        assert!(parse_config_str(zero_eps, "t").is_err());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_config_str("{\"kind\": \"validate\" \"seed\": 1}", "t").unwrap_err();
        match err {
            ConfigError::Syntax { line, col, .. } => assert_eq!((line, col), (1, 21)),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn round_trips_through_serde() {
        let cfg = parse_config_str(
            r#"{"kind": "poc-sweep", "seed": 3, "particles": [10, 100], "steps": [1, 5], "replicates": 4}"#,
            "t",
        )
        .unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back = parse_config_str(&json, "round-trip").unwrap();
        assert_eq!(cfg, back);
    }
}
