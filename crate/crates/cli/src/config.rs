//! INI-style configuration files.
//!
//! Keys outside any section apply to every command (e.g. `seed = 7`);
//! keys under `[forecast]` only apply to `forecast`, and so on. A key maps
//! to the long flag of the same name with `_` read as `-`. `true` turns a
//! switch on, `false` leaves it off. The file's values are spliced into the
//! argument vector ahead of the user's own flags, and since repeated flags
//! resolve to the last occurrence, the command line wins.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use ini::Ini;

use crate::error::{CliError, CliResult};

pub const SUBCOMMANDS: [&str; 6] = ["simulate", "ingest", "explore", "forecast", "classify", "report"];

/// Global options that take a value (and so hide the next token).
const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--seed", "--config"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub global: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::input(format!("config: {e}")))?;
        let mut cfg = ConfigFile::default();
        for (section, props) in ini.iter() {
            let pairs: Vec<(String, String)> = props.iter().map(|(k, v)| (k.trim().replace('_', "-"), v.trim().to_string())).collect();
            for (k, _) in &pairs {
                if k == "config" {
                    return Err(CliError::input("config: files cannot include other config files"));
                }
            }
            match section {
                None => cfg.global.extend(pairs),
                Some(name) => {
                    let name = name.trim().to_string();
                    if !SUBCOMMANDS.contains(&name.as_str()) {
                        return Err(CliError::input(format!("config: unknown section [{name}]")));
                    }
                    cfg.sections.push((name, pairs));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn section<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a (String, String)> + 'a {
        self.sections.iter().filter(move |(s, _)| s == name).flat_map(|(_, p)| p.iter())
    }
}

fn to_flags<'a>(pairs: impl Iterator<Item = &'a (String, String)>) -> CliResult<Vec<OsString>> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        match v.to_ascii_lowercase().as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ if v.is_empty() => return Err(CliError::input(format!("config: key '{k}' has no value"))),
            _ => out.push(format!("--{k}={v}").into()),
        }
    }
    Ok(out)
}

/// Value of `--config` anywhere before a `--` terminator.
pub fn find_config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Index of the subcommand token, skipping leading global options.
pub fn find_subcommand(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return SUBCOMMANDS.contains(&s.as_ref()).then_some(i);
        }
    }
    None
}

/// Splices config-file flags into `argv` ahead of the user's flags.
pub fn inject(argv: &[OsString], cfg: &ConfigFile) -> CliResult<Vec<OsString>> {
    let mut out: Vec<OsString> = argv.to_vec();
    let Some(sub) = find_subcommand(argv) else {
        return Ok(out);
    };
    let name = argv[sub].to_string_lossy().into_owned();
    let local = to_flags(cfg.section(&name))?;
    out.splice(sub + 1..sub + 1, local);
    let global = to_flags(cfg.global.iter())?;
    out.splice(1..1, global);
    Ok(out)
}

/// Applies `--config FILE` if present.
pub fn expand(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    match find_config_path(&argv) {
        Some(path) => inject(&argv, &ConfigFile::load(Path::new(&path))?),
        None => Ok(argv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    fn strs(v: &[OsString]) -> Vec<String> {
        v.iter().map(|s| s.to_string_lossy().into_owned()).collect()
    }

    #[test]
    fn sections_and_globals_are_spliced() {
        let cfg = ConfigFile::parse("seed = 7\n# comment\n[forecast]\nmodel = nar\nplots = true\nscope_all = false\n[simulate]\nhorizon=5\n").unwrap();
        let out = inject(&args("cp --seed 1 forecast --model arima"), &cfg).unwrap();
        assert_eq!(strs(&out), ["cp", "--seed=7", "--seed", "1", "forecast", "--model=nar", "--plots", "--model", "arima"]);
    }

    #[test]
    fn no_subcommand_leaves_args_alone() {
        let cfg = ConfigFile::parse("seed = 7\n").unwrap();
        assert_eq!(inject(&args("cp --version"), &cfg).unwrap(), args("cp --version"));
    }

    #[test]
    fn config_flag_found_in_either_form() {
        assert_eq!(find_config_path(&args("cp simulate --config a.ini")), Some("a.ini".into()));
        assert_eq!(find_config_path(&args("cp --config=b.ini simulate")), Some("b.ini".into()));
        assert_eq!(find_config_path(&args("cp simulate -- --config x")), None);
        assert_eq!(find_subcommand(&args("cp --config c.ini -v explore")), Some(4));
    }

    #[test]
    fn bad_files_rejected() {
        assert!(ConfigFile::parse("[nope]\na=1\n").is_err());
        assert!(ConfigFile::parse("config = x\n").is_err());
        let cfg = ConfigFile::parse("[report]\nout =\n").unwrap();
        assert!(inject(&args("cp report"), &cfg).is_err());
    }
}
