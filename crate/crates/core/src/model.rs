//! Embedder and classifier head built together from one [`Config`].

use std::path::Path;

use crate::archive::WeightArchive;
use crate::embedder::{encoding_name, input_registry, Embedder, Mlp, PositionalTable};
use crate::error::Result;
use crate::harness::Config;
use crate::head::{HeadWeights, TransformerHead};

#[derive(Debug)]
pub struct Model {
    pub embedder: Embedder,
    pub head: TransformerHead,
}

impl Model {
    /// Loads `cfg.weights` if set, otherwise draws random weights from `cfg.seed`.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        match &cfg.weights {
            Some(path) => Model::load(cfg, path),
            None => Model::random(cfg),
        }
    }

    pub fn random(cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let mlp = Mlp::random(cfg.mlp, cfg.seed)?;
        let pos = PositionalTable::random(cfg.grid.cells(), cfg.mlp.out_channels, cfg.seed.wrapping_add(1));
        let head = HeadWeights::random(&cfg.head, cfg.seed.wrapping_add(2));
        Model::assemble(cfg, mlp, pos, head)
    }

    pub fn from_archive(cfg: &Config, archive: &WeightArchive) -> Result<Self> {
        cfg.validate()?;
        let mlp = Mlp::read_from(cfg.mlp, archive)?;
        let pos = PositionalTable::read_from(archive, cfg.grid.cells(), cfg.mlp.out_channels)?;
        let head = HeadWeights::read_from(&cfg.head, archive)?;
        Model::assemble(cfg, mlp, pos, head)
    }

    pub fn load(cfg: &Config, path: impl AsRef<Path>) -> Result<Self> {
        Model::from_archive(cfg, &WeightArchive::load(path)?)
    }

    fn assemble(cfg: &Config, mlp: Mlp, pos: PositionalTable, head: HeadWeights) -> Result<Self> {
        let input = input_registry().create(encoding_name(&cfg.te), &cfg.te)?;
        Ok(Model {
            embedder: Embedder::new(cfg.grid, input, mlp, pos)?,
            head: TransformerHead::new(cfg.head, head)?,
        })
    }

    pub fn to_archive(&self) -> Result<WeightArchive> {
        let mut a = WeightArchive::new();
        self.embedder.mlp.write_to(&mut a)?;
        self.embedder.positional.write_to(&mut a)?;
        self.head.weights.write_to(&mut a)?;
        Ok(a)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_archive()?.save(path)
    }
}
