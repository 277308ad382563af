//! Run configuration: a flat key = value text format, one assignment per
//! line, `#` comments. Every key is optional except `model` and its single
//! parameter; unknown or repeated keys are hard errors so that typos cannot
//! silently fall back to defaults.

use crate::cross::CrossingSettings;
use crate::error::{Error, Result};
use crate::geom::{BBox, P2};
use crate::maps::MapModel;
use crate::tangle::TangleSettings;
use crate::trace::TraceSettings;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: MapModel,
    pub guess: P2,
    pub trace: TraceSettings,
    pub tangle: TangleSettings,
    /// Reach of the wide confirmation scan (offsets 2..=n_scan on both
    /// sides of every counted bigon).
    pub n_scan: i64,
    pub out_dir: String,
    pub wide_scan: bool,
    pub dump_curves: bool,
}

/// Key store that records which keys were consumed, so leftovers can be
/// reported as unknown.
struct Keys {
    map: BTreeMap<String, String>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number"))),
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a whole number"))),
        }
    }

    fn take_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true" | "on" | "1" | "yes") => Ok(true),
            Some("false" | "off" | "0" | "no") => Ok(false),
            Some(v) => Err(Error::Config(format!("key '{key}': '{v}' is not a boolean"))),
        }
    }
}

fn split_lines(text: &str) -> Result<Keys> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", lineno + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("line {}: key '{key}' repeated", lineno + 1)));
        }
    }
    Ok(Keys { map })
}

fn require_param(keys: &mut Keys, model: &str, key: &str) -> Result<f64> {
    let v = keys
        .take(key)
        .ok_or_else(|| Error::Config(format!("model '{model}' needs parameter '{key}'")))?;
    v.parse().map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number")))
}

fn parse_model(keys: &mut Keys) -> Result<MapModel> {
    let name = keys.take("model").ok_or_else(|| Error::Config("missing key 'model'".into()))?;
    match name.as_str() {
        "standard_map" => Ok(MapModel::StandardMapLift { k: require_param(keys, &name, "k")? }),
        "henon" => Ok(MapModel::CubicHenon { a: require_param(keys, &name, "a")? }),
        "pendulum" => Ok(MapModel::PendulumVerlet { tau: require_param(keys, &name, "tau")? }),
        "linear" => Ok(MapModel::Linear { lambda: require_param(keys, &name, "lambda")? }),
        other => Err(Error::Config(format!(
            "unknown model '{other}' (expected standard_map, henon, pendulum, or linear)"
        ))),
    }
}

fn parse_box(keys: &mut Keys) -> Result<BBox> {
    let Some(v) = keys.take("box") else {
        return Ok(BBox::new(-10.0, -10.0, 10.0, 10.0));
    };
    let parts: Vec<f64> = v
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| Error::Config(format!("key 'box': '{p}' is not a number"))))
        .collect::<Result<_>>()?;
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "key 'box': expected 4 numbers (xmin ymin xmax ymax), got {}",
            parts.len()
        )));
    }
    if !(parts[0] < parts[2] && parts[1] < parts[3]) {
        return Err(Error::Config("key 'box': min corner must be below max corner".into()));
    }
    Ok(BBox::new(parts[0], parts[1], parts[2], parts[3]))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut keys = split_lines(text)?;
    let model = parse_model(&mut keys)?;

    let guess = match (keys.take("guess_x"), keys.take("guess_y")) {
        (None, None) => model.default_fixed_point_guess(),
        (Some(x), Some(y)) => {
            let gx = x
                .parse()
                .map_err(|_| Error::Config(format!("key 'guess_x': '{x}' is not a number")))?;
            let gy = y
                .parse()
                .map_err(|_| Error::Config(format!("key 'guess_y': '{y}' is not a number")))?;
            P2::new(gx, gy)
        }
        _ => return Err(Error::Config("guess_x and guess_y must be given together".into())),
    };

    let bbox = parse_box(&mut keys)?;
    let trace = TraceSettings {
        delta: keys.take_f64("delta", 1e-4)?,
        delta_inner: keys.take_f64("proj_tol", 1e-6)?,
        seed_c: keys.take_f64("seed_c", 1.0)?,
        depth: keys.take_usize("depth", 6)?,
        h_max: keys.take_f64("h_max", 1e-2)?,
        theta_max: keys.take_f64("theta_max", 0.1)?,
        max_vertices: keys.take_usize("max_vertices", 2_000_000)?,
        bbox,
    };
    let mut crossing = CrossingSettings::from_bbox(bbox);
    crossing.grid_cell = keys.take_f64("grid_cell", crossing.grid_cell)?;
    crossing.alpha_min = keys.take_f64("alpha_min", crossing.alpha_min)?;
    crossing.dedup_rel = keys.take_f64("dedup_rel", crossing.dedup_rel)?;
    let mut tangle = TangleSettings::from_crossing(crossing);
    tangle.match_tol = keys.take_f64("match_tol", tangle.match_tol)?;
    tangle.match_rel = keys.take_f64("match_rel", tangle.match_rel)?;

    let cfg = RunConfig {
        model,
        guess,
        trace,
        tangle,
        n_scan: keys.take_usize("n_scan", 5)? as i64,
        out_dir: keys.take("out_dir").unwrap_or_else(|| "out".into()),
        wide_scan: keys.take_bool("wide_scan", false)?,
        dump_curves: keys.take_bool("dump_curves", false)?,
    };

    if !keys.map.is_empty() {
        let unknown: Vec<&str> = keys.map.keys().map(|s| s.as_str()).collect();
        return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    let t = &cfg.trace;
    let positive = [
        ("delta", t.delta),
        ("proj_tol", t.delta_inner),
        ("seed_c", t.seed_c),
        ("h_max", t.h_max),
        ("theta_max", t.theta_max),
        ("grid_cell", cfg.tangle.crossing.grid_cell),
        ("alpha_min", cfg.tangle.crossing.alpha_min),
        ("dedup_rel", cfg.tangle.crossing.dedup_rel),
        ("match_tol", cfg.tangle.match_tol),
        ("match_rel", cfg.tangle.match_rel),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("key '{name}' must be positive and finite")));
        }
    }
    if t.depth < 1 {
        return Err(Error::Config("key 'depth' must be at least 1".into()));
    }
    if t.delta_inner >= t.delta {
        return Err(Error::Config("'proj_tol' must be smaller than 'delta'".into()));
    }
    if t.theta_max > 1.0 {
        return Err(Error::Config("key 'theta_max' must be at most 1 radian".into()));
    }
    if t.max_vertices < 1000 {
        return Err(Error::Config("key 'max_vertices' must be at least 1000".into()));
    }
    if cfg.n_scan < 2 {
        return Err(Error::Config("key 'n_scan' must be at least 2".into()));
    }
    if cfg.tangle.crossing.alpha_min >= 1.0 {
        return Err(Error::Config("key 'alpha_min' must be below 1 radian".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_example_parses_with_every_key() {
        let text = "
            # model section
            model = henon
            a = 3.0
            guess_x = 0.01
            guess_y = 0.01
            delta = 0.03      # seed offset
            proj_tol = 1e-6
            seed_c = 1.0
            depth = 9
            h_max = 0.01
            theta_max = 0.1
            max_vertices = 500000
            box = -6 -6 6 6
            grid_cell = 0.02
            alpha_min = 1e-3
            dedup_rel = 1e-9
            match_tol = 1e-6
            match_rel = 1e-7
            n_scan = 5
            out_dir = results
            wide_scan = on
            dump_curves = false
        ";
        let cfg = parse_config(text).unwrap();
        assert!(matches!(cfg.model, MapModel::CubicHenon { a } if a == 3.0));
        assert_eq!(cfg.trace.depth, 9);
        assert_eq!(cfg.trace.delta, 0.03);
        assert_eq!(cfg.trace.bbox.min.x, -6.0);
        assert_eq!(cfg.out_dir, "results");
        assert!(cfg.wide_scan);
        assert!(!cfg.dump_curves);
    }

    #[test]
    fn defaults_fill_everything_but_the_model() {
        let cfg = parse_config("model = standard_map\nk = 1.2\n").unwrap();
        assert_eq!(cfg.trace.delta, 1e-4);
        assert_eq!(cfg.trace.depth, 6);
        assert_eq!(cfg.trace.bbox.max.x, 10.0);
        assert_eq!(cfg.n_scan, 5);
        assert!(!cfg.wide_scan);
        // the default guess for the lift is the origin
        assert_eq!(cfg.guess, cfg.model.default_fixed_point_guess());
    }

    fn expect_config_error(text: &str, needle: &str) {
        match parse_config(text) {
            Err(Error::Config(msg)) => {
                assert!(msg.contains(needle), "message '{msg}' lacks '{needle}'")
            }
            other => panic!("expected a config error for {text:?}, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_are_rejected_with_context() {
        expect_config_error("model = henon\n", "needs parameter 'a'");
        expect_config_error("model = morse\n", "unknown model");
        expect_config_error("a = 3.0\n", "missing key 'model'");
        expect_config_error("model = henon\na = 3.0\na = 4.0\n", "repeated");
        expect_config_error("model = henon\na = 3.0\nwhat = 1\n", "unknown keys: what");
        expect_config_error("model = henon\na = 3.0\ndepth = 0\n", "depth");
        expect_config_error("model = henon\na = 3.0\ndelta = -1\n", "positive");
        expect_config_error("model = henon\na = 3.0\nbox = 1 1 0 0\n", "min corner");
        expect_config_error("model = henon\na = 3.0\nbox = 1 2 3\n", "expected 4");
        expect_config_error("model = henon\na = 3.0\ndepth = two\n", "whole number");
        expect_config_error("model = henon\na = 3.0\nwide_scan = maybe\n", "boolean");
        expect_config_error("model = henon\na = 3.0\nguess_x = 1\n", "together");
        expect_config_error("model = henon\na = 3.0\nno_equals_here\n", "key = value");
        expect_config_error("model = henon\na = 3.0\nk = 1.2\n", "unknown keys: k");
    }

    #[test]
    fn parser_survives_arbitrary_bytes() {
        // smoke version of the fuzz property: any input is either parsed or
        // rejected with Config, never a panic
        let samples = [
            "",
            "=",
            "= =",
            "model =",
            "\u{0}\u{1}\u{2}",
            "model = henon\na = nan\n",
            "model = henon\na = inf\n",
            "box = 0 0 1 1",
            &"x".repeat(10_000),
            "model = henon\na = 3.0\nbox = 1e308 0 1e309 1\n",
        ];
        for s in samples {
            match parse_config(s) {
                Ok(_) | Err(Error::Config(_)) => {}
                other => panic!("unexpected outcome for {s:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn nan_tolerances_are_rejected() {
        expect_config_error("model = henon\na = 3.0\ndelta = nan\n", "positive");
        expect_config_error("model = henon\na = 3.0\nh_max = inf\n", "positive");
    }
}
