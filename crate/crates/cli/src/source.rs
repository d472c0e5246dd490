//! Building a model (and, when applicable, its graph) from command-line
//! arguments: either a JSON file or a family name with k=v parameters.

use crate::{CliError, ModelArgs};
use warm_core::model::{
    build_family, family_graph, load_model_json, FamilyParams, FamilySpec, GraphSpec, WarmModel,
};

pub fn parse_params(text: &str) -> Result<FamilyParams, CliError> {
    let mut params = FamilyParams::default();
    for piece in text.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = piece
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("bad parameter {piece:?}, want k=v")))?;
        let int = || -> Result<usize, CliError> {
            value
                .parse()
                .map_err(|_| CliError::validation(format!("{key}={value}: not an integer")))
        };
        match key.trim() {
            "n" => params.n = Some(int()?),
            "m" => params.m = Some(int()?),
            "n_v" => params.n_v = Some(int()?),
            "r" => params.r = Some(int()?),
            "s" => params.s = Some(int()?),
            "k" => params.k = Some(int()?),
            "p" => {
                params.p =
                    Some(value.parse().map_err(|_| {
                        CliError::validation(format!("{key}={value}: not a number"))
                    })?)
            }
            other => return Err(CliError::validation(format!("unknown parameter {other:?}"))),
        }
    }
    Ok(params)
}

pub struct LoadedModel {
    pub model: WarmModel,
    pub family: Option<FamilySpec>,
    pub graph: Option<GraphSpec>,
}

/// Resolves --model / --family / --params / --alpha into a validated model.
pub fn load(args: &ModelArgs) -> Result<LoadedModel, CliError> {
    match (&args.model, &args.family) {
        (Some(_), Some(_)) => Err(CliError::validation(
            "--model and --family are mutually exclusive",
        )),
        (None, None) => Err(CliError::validation(
            "one of --model or --family is required",
        )),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("cannot read {path}: {e}")))?;
            let mut model =
                load_model_json(&text).map_err(|e| CliError::validation(e.to_string()))?;
            if let Some(alpha) = args.alpha {
                model = model
                    .with_alpha(alpha)
                    .map_err(|e| CliError::validation(e.to_string()))?;
            }
            // Recover family/graph metadata when the file used the family shape.
            let family: Option<FamilySpec> = serde_json::from_str(&text).ok();
            let graph = match &family {
                Some(spec) => family_graph(spec).ok().flatten(),
                None => None,
            };
            Ok(LoadedModel {
                model,
                family,
                graph,
            })
        }
        (None, Some(name)) => {
            let alpha = args
                .alpha
                .ok_or_else(|| CliError::validation("--alpha is required with --family"))?;
            let spec = FamilySpec {
                family: name.clone(),
                alpha,
                params: parse_params(&args.params)?,
            };
            let model = build_family(&spec).map_err(|e| CliError::validation(e.to_string()))?;
            let graph = family_graph(&spec).map_err(|e| CliError::validation(e.to_string()))?;
            Ok(LoadedModel {
                model,
                family: Some(spec),
                graph,
            })
        }
    }
}

pub fn write_output(out: Option<&str>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}
