use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Stop reference used for the workplace end of first legs.
pub const WORKPLACE_REF: &str = "workplace";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub depart: NaiveDateTime,
    pub duration_s: f64,
    pub distance_m: f64,
    #[serde(default)]
    pub polyline: Vec<GeoPoint>,
}

/// Pre-sampled driving results for one ordered stop pair, indexed by
/// departure time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeProfile {
    pub from: String,
    pub to: String,
    pub samples: Vec<ProfileSample>,
}

impl TravelTimeProfile {
    pub fn validate(&self) -> Result<()> {
        let leg = || format!("{} -> {}", self.from, self.to);
        if self.samples.is_empty() {
            return Err(Error::InvalidInput(format!("profile {} has no samples", leg())));
        }
        for w in self.samples.windows(2) {
            if w[1].depart <= w[0].depart {
                return Err(Error::InvalidInput(format!(
                    "profile {} samples not strictly sorted at {}",
                    leg(),
                    w[1].depart
                )));
            }
        }
        for s in &self.samples {
            if !(s.duration_s > 0.0 && s.duration_s.is_finite())
                || !(s.distance_m > 0.0 && s.distance_m.is_finite())
            {
                return Err(Error::InvalidInput(format!(
                    "profile {} sample at {} needs positive duration and distance",
                    leg(),
                    s.depart
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct TravelTimeProfiles {
    legs: BTreeMap<(String, String), TravelTimeProfile>,
}

impl TravelTimeProfiles {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, profile: TravelTimeProfile) -> Result<()> {
        profile.validate()?;
        let key = (profile.from.clone(), profile.to.clone());
        if self.legs.contains_key(&key) {
            return Err(Error::InvalidInput(format!(
                "duplicate profile {} -> {}",
                key.0, key.1
            )));
        }
        self.legs.insert(key, profile);
        Ok(())
    }

    pub fn get(&self, from: &str, to: &str) -> Option<&TravelTimeProfile> {
        self.legs.get(&(from.to_string(), to.to_string()))
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TravelTimeProfile> {
        self.legs.values()
    }

    /// Date of the earliest sample; clock-only departure requests resolve
    /// against it.
    pub fn service_date(&self) -> Option<NaiveDate> {
        self.legs
            .values()
            .filter_map(|p| p.samples.first())
            .map(|s| s.depart.date())
            .min()
    }

    pub fn from_json<R: Read>(source: R) -> Result<Self> {
        let list: Vec<TravelTimeProfile> = serde_json::from_reader(source)?;
        let mut out = Self::new();
        for p in list {
            out.insert(p)?;
        }
        Ok(out)
    }

    pub fn to_json<W: Write>(&self, sink: W) -> Result<()> {
        let list: Vec<&TravelTimeProfile> = self.legs.values().collect();
        serde_json::to_writer(sink, &list)?;
        Ok(())
    }
}
