use std::path::Path;

use pcc_core::ldo::{complete_with_reference, reconstruct, LdoError, StopReason};
use pcc_core::nets::ModelBundle;
use pcc_core::pipeline::{
    extract_gfvs, format_ae_history, format_gan_history, pad_clouds, train_autoencoder, train_gan, TrainError,
    TrainedModels,
};
use pcc_core::seeds;
use pcc_core::shapes_io::{
    format_xyz, generate_dataset, load_bundle, save_bundle, split_dataset, write_id_list, SyntheticSpec,
};
use pcc_core::PointCloud;

use crate::config::{to_text, CompleteConfig, CorruptConfig, GenConfig, TrainCommandConfig};
use crate::data::{self, Entry, EFFECTIVE_CONFIG};
use crate::CliError;

fn echo_config<T: serde::Serialize>(out: &Path, config: &T) -> Result<(), CliError> {
    data::create_dir(out)?;
    data::write(&out.join(EFFECTIVE_CONFIG), to_text(config)?.as_bytes())
}

fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<(), CliError> {
    data::write(path, format_xyz(cloud).as_bytes())
}

/// Clouds, manifest, split lists and the effective config.
pub fn cmd_gen(config: &GenConfig, out: &Path) -> Result<Vec<Entry>, CliError> {
    config.validate()?;
    let stream = seeds::substream(config.seed, "dataset");
    let mut clouds = Vec::new();
    for (k, &class) in config.classes.iter().enumerate() {
        let mut spec = SyntheticSpec::new(class, config.points_per_cloud, config.count, seeds::child(stream, k as u64));
        spec.ranges = config.ranges.clone();
        clouds.extend(generate_dataset(&spec)?);
    }
    echo_config(out, config)?;
    let mut entries = Vec::with_capacity(clouds.len());
    for c in &clouds {
        let file = format!("{}.xyz", c.id);
        write_cloud(&out.join(&file), &c.cloud)?;
        entries.push(Entry { id: c.id.clone(), file, label: c.class.to_string() });
    }
    data::write_manifest(out, &entries)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let split = split_dataset(&ids, config.ratios, seeds::substream(config.seed, "split"))?;
    write_id_list(&out.join("train.txt"), &split.train)?;
    write_id_list(&out.join("val.txt"), &split.val)?;
    write_id_list(&out.join("test.txt"), &split.test)?;
    Ok(entries)
}

/// Corrupted clouds plus a `<id>.removed.txt` sidecar of removed indices.
pub fn cmd_corrupt(input: &Path, ids: Option<&Path>, config: &CorruptConfig, out: &Path) -> Result<Vec<Entry>, CliError> {
    config.validate()?;
    let entries = data::select(data::list_dir(input)?, ids)?;
    let clouds = entries.iter().map(|e| data::load(input, e)).collect::<Result<Vec<_>, _>>()?;
    let mut results = Vec::with_capacity(clouds.len());
    for (e, cloud) in entries.iter().zip(&clouds) {
        let spec = config.corruption.reseeded(seeds::substream(config.corruption.seed, &format!("masking/{}", e.id)));
        let done = spec.apply(cloud).map_err(|err| CliError::Data(format!("{}: {err}", e.id)))?;
        results.push(done);
    }
    echo_config(out, config)?;
    let mut written = Vec::with_capacity(entries.len());
    for (e, done) in entries.iter().zip(&results) {
        let file = format!("{}.xyz", e.id);
        write_cloud(&out.join(&file), &done.cloud)?;
        let removed: String = done.removed.iter().map(|i| format!("{i}\n")).collect();
        data::write(&out.join(format!("{}.removed.txt", e.id)), removed.as_bytes())?;
        written.push(Entry { id: e.id.clone(), file, label: e.label.clone() });
    }
    data::write_manifest(out, &written)?;
    Ok(written)
}

/// AE loss log, feature vectors, GAN loss log and the bundle. Logs written
/// before a divergence are kept.
pub fn cmd_train(
    input: &Path,
    ids: Option<&Path>,
    config: &TrainCommandConfig,
    out: &Path,
    bundle_path: &Path,
) -> Result<TrainedModels, CliError> {
    config.validate()?;
    let cfg = &config.train;
    let entries = data::select(data::list_dir(input)?, ids)?;
    if entries.is_empty() {
        return Err(CliError::Data(format!("{}: no training clouds", input.display())));
    }
    let clouds = entries.iter().map(|e| data::load(input, e)).collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let clouds = pad_clouds(&clouds, cfg.n_out, cfg.seed)?;
    echo_config(out, config)?;

    let ae = match train_autoencoder(&clouds, cfg) {
        Ok(ae) => ae,
        Err(TrainError::Diverged { stage, epoch, history }) => {
            data::write(&out.join("ae_loss.tsv"), format_ae_history(&history).as_bytes())?;
            return Err(TrainError::Diverged { stage, epoch, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    data::write(&out.join("ae_loss.tsv"), format_ae_history(&ae.history).as_bytes())?;
    let gfvs = extract_gfvs(&ae.encoder, &clouds, &ids)?;
    data::write(&out.join("gfv.tsv"), gfvs.to_text().as_bytes())?;
    let gan = match train_gan(&gfvs, cfg) {
        Ok(gan) => gan,
        Err(TrainError::Diverged { stage, epoch, history }) => {
            let partial: String = std::iter::once("# epoch\tj_d\n".to_string())
                .chain(history.iter().enumerate().map(|(i, v)| format!("{}\t{v:.9e}\n", i + 1)))
                .collect();
            data::write(&out.join("gan_loss.tsv"), partial.as_bytes())?;
            return Err(TrainError::Diverged { stage, epoch, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    data::write(&out.join("gan_loss.tsv"), format_gan_history(&gan.history).as_bytes())?;
    let bundle = ModelBundle {
        descriptor: cfg.descriptor(),
        encoder: ae.encoder,
        decoder: ae.decoder,
        generator: gan.generator,
        discriminator: gan.discriminator,
        init_encoder: gan.init_encoder,
    };
    save_bundle(&bundle, bundle_path)?;
    Ok(TrainedModels { bundle, ae_history: ae.history, gfvs, gan_history: gan.history })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletedEntry {
    pub id: String,
    pub cloud: PointCloud,
    /// `None` for plain reconstructions.
    pub stop: Option<StopReason>,
    pub iterations: usize,
}

/// Completed clouds as `<id>.xyz`, with `<id>.trace.tsv` unless `no_ldo`.
pub fn cmd_complete(
    input: &Path,
    bundle_path: &Path,
    config: &CompleteConfig,
    out: &Path,
    ground_truth: Option<&Path>,
) -> Result<Vec<CompletedEntry>, CliError> {
    config.validate()?;
    let (dir, entries) = data::inputs(input)?;
    let bundle = load_bundle(bundle_path)?;
    let truth = match ground_truth {
        Some(gt) => Some((gt, data::list_dir(gt)?)),
        None => None,
    };
    echo_config(out, config)?;
    let mut done = Vec::with_capacity(entries.len());
    let mut written = Vec::with_capacity(entries.len());
    for e in &entries {
        let partial = data::load(&dir, e)?;
        let file = format!("{}.xyz", e.id);
        let result = if config.no_ldo {
            let cloud = reconstruct(&bundle, &partial, config.ldo.seed)?;
            CompletedEntry { id: e.id.clone(), cloud, stop: None, iterations: 0 }
        } else {
            let gt = match &truth {
                Some((gt_dir, gt_entries)) => {
                    let entry = gt_entries
                        .iter()
                        .find(|g| g.id == e.id)
                        .ok_or_else(|| CliError::Data(format!("no ground truth for {}", e.id)))?;
                    Some(data::load(gt_dir, entry)?)
                }
                None => None,
            };
            let trace_path = out.join(format!("{}.trace.tsv", e.id));
            match complete_with_reference(&partial, &bundle, &config.ldo, gt.as_ref()) {
                Ok(c) => {
                    data::write(&trace_path, c.trace.to_text().as_bytes())?;
                    CompletedEntry { id: e.id.clone(), cloud: c.cloud, stop: Some(c.stop), iterations: c.trace.len() - 1 }
                }
                Err(LdoError::NonFinite { trace }) => {
                    data::write(&trace_path, trace.to_text().as_bytes())?;
                    return Err(LdoError::NonFinite { trace }.into());
                }
                Err(err) => return Err(CliError::from(err)),
            }
        };
        write_cloud(&out.join(&file), &result.cloud)?;
        written.push(Entry { id: e.id.clone(), file, label: e.label.clone() });
        done.push(result);
    }
    data::write_manifest(out, &written)?;
    Ok(done)
}
