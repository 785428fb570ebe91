//! Endorsement data ingestion and assembly of joint-fit datasets.
//!
//! Endorsement CSVs come in two shapes, told apart by their header:
//! aggregated counts (`item,property,category,referent,n_agree,n_total`) or
//! one row per judgment (`participant_id,item,property,category,referent,response`).
//! An empty `referent` means the referent prevalence is elicited for the
//! item's category; a number is taken as the known prevalence or rate.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};
use crate::inference::{EndorsementItem, JointData, PriorData, PropertyBlock, ReferentBlock, ReferentSource};
use crate::priors::{ElicitationTable, HabitualElicitationTable};

/// One endorsement judgment from one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndorsementJudgment {
    pub participant_id: String,
    pub item: String,
    pub agree: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EndorsementTable {
    pub items: Vec<EndorsementItem>,
    /// Item categories, parallel to `items`.
    pub categories: Vec<String>,
    /// Per-participant judgments when the input was raw.
    pub judgments: Vec<EndorsementJudgment>,
}

fn parse_agree(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "agree" | "yes" | "true" | "agree-key" => Some(true),
        "0" | "disagree" | "no" | "false" | "disagree-key" => Some(false),
        _ => None,
    }
}

fn parse_referent(s: &str, category: &str, line: u64) -> Result<ReferentSource> {
    let s = s.trim();
    if s.is_empty() {
        if category.is_empty() {
            return Err(Error::Parse { line, message: "elicited referent needs a category".into() });
        }
        return Ok(ReferentSource::Elicited(category.to_string()));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("referent '{s}' is not a number") })?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Parse { line, message: format!("referent {v} must be >= 0") });
    }
    Ok(ReferentSource::Given(v))
}

impl EndorsementTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let need = |name: &str| col(name).ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") });
        let item_c = need("item")?;
        let prop_c = need("property")?;
        let cat_c = col("category");
        let ref_c = col("referent");
        let raw = col("response").is_some();
        let (a_c, b_c) = if raw {
            (need("participant_id")?, need("response")?)
        } else {
            (need("n_agree")?, need("n_total")?)
        };

        let mut table = EndorsementTable::default();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let line = i as u64 + 2;
            let get = |c: usize| rec.get(c).unwrap_or("").to_string();
            let item = get(item_c);
            let property = get(prop_c);
            if item.is_empty() || property.is_empty() {
                return Err(Error::Parse { line, message: "empty item or property".into() });
            }
            let category = cat_c.map(get).unwrap_or_default();
            let referent = parse_referent(&ref_c.map(get).unwrap_or_default(), &category, line)?;
            let (agree, total) = if raw {
                let agree = parse_agree(&get(b_c)).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("response '{}' is not agree/disagree", get(b_c)),
                })?;
                table.judgments.push(EndorsementJudgment { participant_id: get(a_c), item: item.clone(), agree });
                (u64::from(agree), 1)
            } else {
                let parse = |c: usize| {
                    get(c).parse::<u64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("count '{}' is not a non-negative integer", get(c)),
                    })
                };
                let (k, n) = (parse(a_c)?, parse(b_c)?);
                if n == 0 || k > n {
                    return Err(Error::Parse { line, message: format!("need 0 <= n_agree <= n_total, n_total > 0; got {k}/{n}") });
                }
                (k, n)
            };
            match index.get(&item) {
                Some(&j) => {
                    let it = &mut table.items[j];
                    if it.property != property || it.referent != referent {
                        return Err(Error::Parse { line, message: format!("item '{item}' redefined with a different property or referent") });
                    }
                    it.n_agree += agree;
                    it.n_total += total;
                }
                None => {
                    index.insert(item.clone(), table.items.len());
                    table.items.push(EndorsementItem { id: item, property, referent, n_agree: agree, n_total: total });
                    table.categories.push(category);
                }
            }
        }
        if table.items.is_empty() {
            return Err(Error::Input("endorsement file has no rows".into()));
        }
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.items.iter().map(EndorsementItem::proportion).collect()
    }

    pub fn participants(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for j in &self.judgments {
            if !seen.contains(&j.participant_id) {
                seen.push(j.participant_id.clone());
            }
        }
        seen
    }
}

fn used_properties(items: &[EndorsementItem]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for it in items {
        if !seen.contains(&it.property) {
            seen.push(it.property.clone());
        }
    }
    seen
}

/// Joint dataset from a percent-elicitation table: each item property gets
/// its prior responses, and each elicited referent the responses for its
/// category, looked up in `referents` when given and in `prior` otherwise.
pub fn joint_data_from_elicitation(
    prior: &ElicitationTable,
    referents: Option<&ElicitationTable>,
    endorsements: &EndorsementTable,
) -> Result<JointData> {
    let referent_table = referents.unwrap_or(prior);
    let mut data = JointData { items: endorsements.items.clone(), ..JointData::default() };
    for property in used_properties(&endorsements.items) {
        let responses = prior.responses_for_property(&property);
        if responses.is_empty() {
            return Err(Error::Input(format!("no prior elicitation responses for property '{property}'")));
        }
        data.properties.push(PropertyBlock { name: property, prior: PriorData::Mixture(responses) });
    }
    for it in &endorsements.items {
        if let ReferentSource::Elicited(category) = &it.referent {
            if data.referents.iter().any(|r| &r.category == category && r.property == it.property) {
                continue;
            }
            let responses = referent_table.referent_responses(category, &it.property);
            if responses.is_empty() {
                return Err(Error::Input(format!(
                    "no referent responses for category '{category}' and property '{}'",
                    it.property
                )));
            }
            data.referents.push(ReferentBlock { category: category.clone(), property: it.property.clone(), responses_pct: responses });
        }
    }
    Ok(data)
}

/// Joint dataset from habitual elicitation: Q1 proportions and Q2 rates are
/// pooled across genders for each action.
pub fn joint_data_from_habitual(prior: &HabitualElicitationTable, endorsements: &EndorsementTable) -> Result<JointData> {
    let mut data = JointData { items: endorsements.items.clone(), ..JointData::default() };
    for it in &endorsements.items {
        if matches!(it.referent, ReferentSource::Elicited(_)) {
            return Err(Error::Input(format!("habitual item '{}' needs a numeric referent rate", it.id)));
        }
    }
    for action in used_properties(&endorsements.items) {
        let mut q1 = Vec::new();
        let mut q2 = Vec::new();
        for g in prior.genders(&action) {
            q1.extend(prior.q1_proportions(&action, &g));
            q2.extend(prior.q2_rates(&action, &g));
        }
        if q1.is_empty() || q2.len() < 2 {
            return Err(Error::Input(format!("not enough habitual elicitation data for action '{action}'")));
        }
        data.properties.push(PropertyBlock { name: action, prior: PriorData::Habitual { q1, q2 } });
    }
    Ok(data)
}

/// Expected layout of a published-data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn generics(&self) -> [PathBuf; 2] {
        [self.root.join("generics/prior.csv"), self.root.join("generics/endorsements.csv")]
    }

    pub fn habituals(&self) -> [PathBuf; 3] {
        [
            self.root.join("habituals/q1.csv"),
            self.root.join("habituals/q2.csv"),
            self.root.join("habituals/endorsements.csv"),
        ]
    }

    pub fn causals(&self) -> [PathBuf; 2] {
        [self.root.join("causals/prior.csv"), self.root.join("causals/endorsements.csv")]
    }

    /// Files absent for a case, empty when the case can run.
    pub fn missing(&self, case: &str) -> Vec<PathBuf> {
        let files: Vec<PathBuf> = match case {
            "generics" => self.generics().to_vec(),
            "habituals" => self.habituals().to_vec(),
            "causals" => self.causals().to_vec(),
            _ => Vec::new(),
        };
        files.into_iter().filter(|p| !p.is_file()).collect()
    }

    pub fn load_generics(&self) -> Result<(JointData, EndorsementTable)> {
        let [prior, end] = self.generics();
        let table = EndorsementTable::from_path(&end)?;
        Ok((joint_data_from_elicitation(&ElicitationTable::from_path(&prior)?, None, &table)?, table))
    }

    pub fn load_habituals(&self) -> Result<(JointData, EndorsementTable)> {
        let [q1, q2, end] = self.habituals();
        let table = EndorsementTable::from_path(&end)?;
        Ok((joint_data_from_habitual(&HabitualElicitationTable::from_paths(&q1, &q2)?, &table)?, table))
    }

    pub fn load_causals(&self) -> Result<(JointData, EndorsementTable)> {
        let [prior, end] = self.causals();
        let table = EndorsementTable::from_path(&end)?;
        Ok((joint_data_from_elicitation(&ElicitationTable::from_path(&prior)?, None, &table)?, table))
    }
}
