use std::collections::BTreeMap;

use ctxshap_core::plot::{build_bar, build_waterfall, render_svg, PlotSpec, Theme};
use ctxshap_core::prompt::parse_response;
use ctxshap_core::shap::export_batch_json;
use ctxshap_core::{aggregate_global, assemble, Attribution, PlotKind, TreeEnsemble};
use ctxshap_gateway::{Gateway, GatewayConfig, PriceTable};

use crate::args::{ExplainArgs, Global, KindArg};
use crate::error::{CliError, EXIT_FORMAT};
use crate::inputs;
use crate::report::{FileRef, OutDir, Report, Telemetry, Tool};

fn gateway_config(global: &Global) -> GatewayConfig {
    GatewayConfig {
        base_url: global.base_url.clone(),
        model_name: global.llm_model.clone(),
        api_key_env: global.api_key_env.clone(),
        timeout_s: global.timeout,
        max_retries: global.max_retries,
        mode: global.mode.into(),
        fixture_dir: global.fixtures.clone(),
        raster: !global.no_raster,
        prices: match (global.price_input, global.price_output) {
            (Some(input_per_1k), Some(output_per_1k)) => Some(PriceTable {
                input_per_1k,
                output_per_1k,
            }),
            _ => None,
        },
        ..GatewayConfig::default()
    }
}

fn plot(kind: PlotKind, model: &TreeEnsemble, attrs: &[Attribution], max_display: usize) -> Result<String, CliError> {
    let names = model.features().names();
    let spec = match kind {
        PlotKind::Waterfall => {
            let attr = &attrs[0];
            PlotSpec::Waterfall(build_waterfall(attr, names, attr.instance().values(), max_display)?)
        }
        PlotKind::Bar => PlotSpec::Bar(build_bar(&aggregate_global(attrs)?, names, max_display)?),
    };
    Ok(render_svg(&spec, &Theme::default()))
}

fn record_inputs(global: &Global, args: &ExplainArgs) -> Result<BTreeMap<&'static str, FileRef>, CliError> {
    let mut refs = BTreeMap::new();
    let sources = [
        ("model", &global.model),
        ("background", &global.background),
        ("context", &global.context),
        ("instances", &args.selection.instances),
    ];
    for (role, path) in sources {
        if let Some(path) = path {
            refs.insert(role, FileRef::input(path, &inputs::read(path)?));
        }
    }
    if let Some(json) = &args.selection.instance_json {
        refs.insert(
            "instance_json",
            FileRef {
                path: "--instance-json".into(),
                sha256: crate::report::sha256_hex(json.as_bytes()),
            },
        );
    }
    Ok(refs)
}

pub fn run(global: &Global, args: &ExplainArgs) -> Result<(), CliError> {
    let kind = match args.kind {
        KindArg::Bar => PlotKind::Bar,
        KindArg::Waterfall => PlotKind::Waterfall,
    };
    if kind == PlotKind::Waterfall && args.selection.index.is_none() && args.selection.instance_json.is_none() {
        return Err(CliError::input(
            "a waterfall explains one instance: pass --index with --instances, or --instance-json",
        ));
    }
    let model = inputs::prepare_model(global)?;
    let ctx = inputs::load_context(global, model.features())?;
    let xs = inputs::select(&args.selection, model.features())?;
    let attrs = super::attributions(&model, &xs, global.cap)?;

    let svg = plot(kind, &model, &attrs, args.max_display)?;
    let bundle = assemble(kind, &attrs, &[svg.clone()], model.features(), &ctx, global.budget)?;

    let mut out = OutDir::create(&global.out)?;
    let mut json = export_batch_json(&attrs, model.features());
    json.push('\n');
    out.write("attributions", "attributions.json", json.as_bytes())?;
    out.write("plot", "plot.svg", svg.as_bytes())?;
    out.write("prompt", "prompt.md", bundle.to_markdown().as_bytes())?;

    let mut explanation = None;
    let mut unmatched = Vec::new();
    let mut telemetry = None;
    if !global.no_llm {
        let gateway = Gateway::new(gateway_config(global))?;
        let result = gateway.send(&bundle)?;
        telemetry = Some(Telemetry::new(gateway.config().mode, &global.llm_model, &result));
        let parsed = match parse_response(&result.raw_text) {
            Ok(parsed) => parsed,
            Err(e) => {
                let saved = out.write("raw_response", "raw_response.txt", result.raw_text.as_bytes())?;
                return Err(CliError::new(
                    EXIT_FORMAT,
                    format!("{e} (raw response saved to {})", saved.display()),
                ));
            }
        };
        for note in &parsed.per_feature {
            let single = ctxshap_core::ParsedExplanation {
                per_feature: vec![note.clone()],
                ..parsed.clone()
            };
            if single.resolve(model.features(), &ctx).is_err() {
                eprintln!("warning: explanation mentions unknown feature {:?}", note.name);
                unmatched.push(note.name.clone());
            }
        }
        out.write_json("explanation", "explanation.json", &parsed)?;
        explanation = Some(parsed);
    }

    let report = Report {
        tool: Tool::current(),
        kind,
        inputs: record_inputs(global, args)?,
        artifacts: out.written.clone(),
        instances: attrs.len(),
        base_value: attrs[0].base_value(),
        max_efficiency_residual: attrs.iter().map(Attribution::efficiency_residual).fold(0.0, f64::max),
        prompt_samples: bundle.sample_count,
        prompt_tokens_estimate: bundle.estimated_tokens(),
        explanation,
        unmatched_features: unmatched,
        telemetry,
    };
    out.write_json("report", "report.json", &report)?;
    Ok(())
}
