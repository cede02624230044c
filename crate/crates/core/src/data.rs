//! Loading a generated dataset directory into network-ready examples.

use std::path::Path;

use rayon::prelude::*;

use crate::error::Result;
use crate::network::Network;
use crate::pgm;
use crate::synth::{image_path, read_manifest, ManifestEntry};
use crate::training::Example;

/// Reads every image of `entries` and runs the network's input stage on it.
pub fn load_examples(dir: &Path, entries: &[ManifestEntry], net: &Network) -> Result<Vec<Example>> {
    entries
        .par_iter()
        .map(|e| {
            let image = pgm::read(&image_path(dir, e))?;
            Ok(Example {
                input: net.prepare(&image)?,
                label: e.label,
            })
        })
        .collect()
}

/// Loads `dir/<manifest>` and its images.
pub fn load_split(dir: &Path, manifest: &str, net: &Network) -> Result<(Vec<ManifestEntry>, Vec<Example>)> {
    let entries = read_manifest(&dir.join(manifest))?;
    let examples = load_examples(dir, &entries, net)?;
    Ok((entries, examples))
}
