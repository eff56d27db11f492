use serde::{Deserialize, Serialize};

use crate::channels::{detect_motion, populate_channels, ChannelTriple, MotionParams, MotionResult, SavingLedger};
use crate::error::Result;
use crate::frame_io::SonarFrame;
use crate::guided::GuidedFilterParams;
use crate::mog::{ForegroundMask, MogField, MogParams};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    pub mog: MogParams,
    pub guided: GuidedFilterParams,
    pub motion: MotionParams,
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        self.mog.validate()?;
        self.guided.validate()?;
        self.motion.validate()
    }
}

pub struct FrameOutput {
    pub mask: ForegroundMask,
    pub channels: ChannelTriple,
    pub motion: MotionResult,
}

/// The per-frame chain for one clip, with its background state and ledger.
pub struct Preprocessor {
    params: PreprocessParams,
    field: MogField,
    ledger: SavingLedger,
}

impl Preprocessor {
    pub fn new(width: u32, height: u32, params: PreprocessParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            field: MogField::new(width, height, params.mog)?,
            params,
            ledger: SavingLedger::default(),
        })
    }

    pub fn process(&mut self, frame: &SonarFrame) -> Result<FrameOutput> {
        let mask = self.field.apply(frame)?;
        let channels = populate_channels(frame, &mask, &self.params.guided)?;
        let motion = detect_motion(&channels, &self.params.motion);
        self.ledger.record(motion.is_motion);
        Ok(FrameOutput {
            mask,
            channels,
            motion,
        })
    }

    pub fn ledger(&self) -> SavingLedger {
        self.ledger
    }

    pub fn field(&self) -> &MogField {
        &self.field
    }

    pub fn params(&self) -> &PreprocessParams {
        &self.params
    }
}
