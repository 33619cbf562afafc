//! Synthetic workspace shared by the integration and acceptance tests: an
//! evidence corpus, twenty case packets with merged structured cases, and
//! scripted backend replay files.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde_json::{json, Value};
use tempfile::TempDir;

use omgs_cli::ingest::{cmd_ingest, IngestConfig, IngestRequest};
use omgs_core::backend::{ReplayEntry, ReplayScript, Selector, Usage};
use omgs_core::case::packet::{write_case_packet, write_structured_case, STRUCTURED_CASE};
use omgs_core::case::{
    ClinicalScene, DocType, ExcludedDocument, Field, FigoStage, HistologyGroup, PrimaryStrategy, RawCaseRecord,
    SourceDocument, StructuredCase, TreatmentLine,
};
use omgs_core::evidence::CorpusSnapshot;

pub const CASES: usize = 20;

pub const TOPICS: [(&str, &str, &str); 24] = [
    ("guideline", "Primary debulking surgery", "Complete cytoreduction is the goal of primary debulking surgery in advanced epithelial ovarian cancer when resectability and fitness allow."),
    ("guideline", "Neoadjuvant chemotherapy", "Neoadjuvant carboplatin and paclitaxel followed by interval debulking surgery is preferred when complete resection is unlikely or the patient is frail."),
    ("guideline", "PARP inhibitor maintenance", "Olaparib or niraparib maintenance is recommended after response to platinum in BRCA mutated or HRD positive high-grade serous ovarian cancer."),
    ("guideline", "Bevacizumab maintenance", "Bevacizumab may be added to first-line chemotherapy and continued as maintenance in stage III or IV disease with residual tumour."),
    ("guideline", "Platinum-resistant relapse", "Single-agent non-platinum chemotherapy with or without bevacizumab is standard for relapse within six months of platinum."),
    ("guideline", "Platinum-sensitive relapse", "Platinum doublet rechallenge followed by PARP inhibitor maintenance is standard for relapse beyond six months from last platinum."),
    ("guideline", "Secondary cytoreduction", "Secondary cytoreductive surgery benefits selected patients with platinum-sensitive relapse, good performance status and no ascites."),
    ("guideline", "Germline BRCA testing", "All women with non-mucinous epithelial ovarian cancer should be offered germline BRCA1 and BRCA2 testing at diagnosis."),
    ("guideline", "Tumour HRD testing", "Homologous recombination deficiency testing on tumour tissue guides PARP inhibitor eligibility in BRCA wild-type disease."),
    ("guideline", "Borderline epithelial tumours", "Borderline ovarian tumours are managed surgically with fertility-sparing options for young women; adjuvant chemotherapy is not indicated."),
    ("guideline", "Germ cell tumours", "Malignant ovarian germ cell tumours are managed with fertility-sparing surgery and BEP chemotherapy for advanced stages."),
    ("guideline", "Sex cord-stromal tumours", "Granulosa cell tumours are treated with surgery; inhibin monitoring detects late relapse."),
    ("guideline", "Imaging response assessment", "CT of chest, abdomen and pelvis assesses peritoneal carcinomatosis; RECIST measurements guide response evaluation."),
    ("guideline", "PET-CT in recurrence", "FDG PET-CT localises recurrent disease when CA-125 rises without a CT correlate and informs secondary surgery selection."),
    ("guideline", "CA-125 surveillance", "CA-125 doubling above the upper limit of normal signals biochemical relapse, though early treatment does not improve survival."),
    ("guideline", "Bowel obstruction", "Malignant bowel obstruction warrants surgical review, nasogastric decompression and palliative care input."),
    ("literature", "SOLO1 trial", "Olaparib maintenance in newly diagnosed BRCA mutated advanced ovarian cancer prolonged progression-free survival substantially."),
    ("literature", "PRIMA trial", "Niraparib maintenance improved progression-free survival in newly diagnosed advanced ovarian cancer irrespective of HRD status."),
    ("literature", "CHORUS trial", "Neoadjuvant chemotherapy was non-inferior to primary surgery for overall survival in stage III and IV ovarian cancer."),
    ("literature", "DESKTOP III trial", "Secondary cytoreduction with complete resection improved overall survival in platinum-sensitive recurrent ovarian cancer."),
    ("literature", "AURELIA trial", "Bevacizumab with chemotherapy improved progression-free survival in platinum-resistant recurrent ovarian cancer."),
    ("literature", "ICON7 trial", "Bevacizumab added to carboplatin paclitaxel benefited high-risk patients with suboptimally debulked stage III disease."),
    ("literature", "HIPEC at interval surgery", "Hyperthermic intraperitoneal chemotherapy at interval debulking improved survival in a randomised stage III cohort."),
    ("literature", "Mirvetuximab in FRalpha-high disease", "Mirvetuximab soravtansine improved survival in folate receptor alpha high platinum-resistant ovarian cancer."),
];

pub fn corpus_lines() -> String {
    let mut out = String::new();
    for (i, (stream, title, text)) in TOPICS.iter().enumerate() {
        let pmid = if *stream == "literature" { json!(30_000_000 + i as u64) } else { Value::Null };
        let line = json!({"stream": stream, "title": title, "pmid": pmid, "text": text});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

pub fn case_id(i: usize) -> String {
    format!("OV-{:03}", i + 1)
}

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 2, 1).unwrap()
}

fn document(case: &str, suffix: &str, doc_type: DocType, date: NaiveDate, body: &str) -> SourceDocument {
    SourceDocument {
        doc_id: format!("{case}-{suffix}"),
        doc_type,
        doc_date: date,
        centre_id: "C1".into(),
        nuclear: false,
        tags: BTreeSet::new(),
        body: body.into(),
    }
}

/// Case `i` as a raw packet and the structured case the merge would produce.
/// Document mix varies with `i`; every fifth case also holds a report dated
/// after the board meeting, which the merge excludes.
pub fn fixture_case(i: usize) -> (RawCaseRecord, StructuredCase) {
    let id = case_id(i);
    let mdt = base_date() + Duration::days(7 * i as i64);
    let before = mdt - Duration::days(10);
    let mut docs = vec![
        document(&id, "PATH", DocType::Pathology, before, "High-grade serous carcinoma of the ovary, p53 aberrant."),
        document(&id, "CT", DocType::Imaging, before, "CT: omental cake and peritoneal nodules, no liver parenchymal metastases."),
        document(&id, "NOTE", DocType::ClinicalNote, before, "ECOG 1. Discussed surgical and systemic options."),
    ];
    let mut lab = document(&id, "LAB", DocType::Laboratory, before, "CA-125 1450 U/mL.");
    lab.tags.insert("tumour-markers".into());
    docs.push(lab);
    if i % 2 == 0 {
        let mut pet = document(&id, "PET", DocType::Imaging, before, "FDG PET-CT: avid peritoneal deposits, no distant nodes.");
        pet.nuclear = true;
        docs.push(pet);
    }
    if i % 3 == 0 {
        docs.push(document(&id, "GEN", DocType::Genomic, before, "Germline BRCA1 pathogenic variant detected."));
    }
    if i % 4 == 0 {
        docs.push(document(&id, "OP", DocType::Operative, before, "Diagnostic laparoscopy: Fagotti score 8."));
        docs.push(document(&id, "MDT", DocType::MdtNote, before, "Previous board recommended neoadjuvant chemotherapy."));
    }
    let mut excluded = Vec::new();
    if i % 5 == 0 {
        let late = document(&id, "LATE", DocType::Imaging, mdt + Duration::days(3), "Post-board CT: progression.");
        excluded.push(ExcludedDocument {
            doc_id: late.doc_id.clone(),
            reason: "dated after the index board meeting".into(),
        });
        docs.push(late);
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let prov = |suffix: &str| {
        docs.iter()
            .find(|d| d.doc_id == format!("{id}-{suffix}"))
            .map(|d| d.provenance())
            .unwrap()
    };
    let scene = ClinicalScene::ALL[i % 5];
    let mut biomarkers = BTreeMap::new();
    biomarkers.insert("CA-125".to_string(), Field::known("1450 U/mL".to_string(), vec![prov("LAB")]));
    biomarkers.insert(
        "BRCA".to_string(),
        if i % 3 == 0 { Field::known("BRCA1 mutated".to_string(), vec![prov("GEN")]) } else { Field::unknown() },
    );
    biomarkers.insert("HRD".to_string(), Field::unknown());
    let relapse = scene == ClinicalScene::PLATINUM_RESISTANT || scene == ClinicalScene::PLATINUM_SENSITIVE;
    let treatment_history = if relapse {
        vec![TreatmentLine {
            therapy: "carboplatin paclitaxel".into(),
            start: mdt - Duration::days(400),
            end: Some(mdt - Duration::days(260)),
            line: 1,
            platinum: true,
            provenance: vec![prov("NOTE")],
        }]
    } else {
        vec![]
    };
    let pfi = if scene == ClinicalScene::PLATINUM_RESISTANT {
        Field::known(4.0, vec![prov("NOTE")])
    } else if scene == ClinicalScene::PLATINUM_SENSITIVE {
        Field::known(14.5, vec![prov("NOTE")])
    } else {
        Field::unknown()
    };
    let stage = [FigoStage::III, FigoStage::IV, FigoStage::II][i % 3];
    let case = StructuredCase {
        case_id: id.clone(),
        index_mdt_date: mdt,
        centre_id: "C1".into(),
        age: Field::known(40 + (i as u32 * 7) % 35, vec![prov("NOTE")]),
        histology_group: Field::known(HistologyGroup::Eoc, vec![prov("PATH")]),
        figo_stage: Field::known(stage, vec![prov("CT")]),
        primary_strategy: if i % 2 == 0 { Field::known(PrimaryStrategy::NactIds, vec![prov("NOTE")]) } else { Field::unknown() },
        biomarkers,
        treatment_history,
        platinum_free_interval_months: pfi,
        event_flags: BTreeMap::new(),
        scene,
        scene_note: None,
        conflicts: vec![],
        source_documents: docs
            .iter()
            .filter(|d| !excluded.iter().any(|e| e.doc_id == d.doc_id))
            .map(|d| d.provenance())
            .collect(),
        excluded_documents: excluded,
    };
    let raw = RawCaseRecord {
        case_id: id,
        index_mdt_date: mdt,
        centre_id: "C1".into(),
        documents: docs,
    };
    (raw, case)
}

pub const DEFAULT_USAGE: Usage = Usage {
    prompt_tokens: 1000,
    completion_tokens: 200,
    wall_ms: 400,
};

/// Cases whose oncologist raises a round-1 intervention, forcing a second
/// polling round.
pub fn intervening(i: usize) -> bool {
    i % 4 == 1
}

pub fn chair_usage(i: usize) -> Usage {
    Usage {
        prompt_tokens: 20_000 + 1_000 * i as u64,
        completion_tokens: 800,
        wall_ms: 5_000 + 400 * i as u64,
    }
}

pub fn assessment(citations: Value) -> Value {
    json!({
        "kind": "initial_assessment",
        "assessment": "Advanced high-grade serous disease; management depends on resectability.",
        "safety_considerations": ["performance status"],
        "uncertainties": [],
        "citations": citations
    })
}

pub fn chair_summary(a: &str, b: &str, c: &str) -> Value {
    json!({
        "kind": "chair_summary",
        "final_assessment": {"text": "Advanced epithelial ovarian cancer with peritoneal spread.", "citations": [a, b]},
        "core_treatment_strategy": {"text": "Platinum-based chemotherapy with biomarker-directed maintenance.", "citations": [a]},
        "change_triggers": [{"condition": "Progression on imaging or a new germline result.", "citations": [c]}]
    })
}

/// Script for multi-agent runs over every fixture case.
pub fn omgs_script() -> ReplayScript {
    let mut s = ReplayScript::new("scripted:fixture-v1");
    s.default_usage = DEFAULT_USAGE;
    for i in 0..CASES {
        if intervening(i) {
            s.push(ReplayEntry::when(
                Selector::role("oncologist").kind("deliberation").round(1).case(case_id(i)),
                json!({
                    "kind": "intervention",
                    "trigger": "SafetyConcern",
                    "directed_to": "radiologist",
                    "rationale": "Resectability depends on the extent of upper abdominal disease.",
                    "content": "Please confirm whether diaphragmatic disease is present.",
                    "citations": ["$evidence[1]"]
                }),
            ));
        }
        s.push(
            ReplayEntry::when(
                Selector::role("chair").kind("chair_summary").case(case_id(i)),
                chair_summary("$evidence[0]", "$source[0]", "$evidence[1]"),
            )
            .with_usage(chair_usage(i)),
        );
    }
    s.push(ReplayEntry::when(
        Selector::default().kind("initial_assessment"),
        assessment(json!(["$evidence[0]"])),
    ));
    s.push(ReplayEntry::when(Selector::default().kind("deliberation"), json!({"kind": "silence"})));
    s
}

/// Script whose chair cites only case documents, valid in every mode.
pub fn baseline_script() -> ReplayScript {
    let mut s = ReplayScript::new("scripted:baseline-v1");
    s.default_usage = DEFAULT_USAGE;
    s.push(ReplayEntry::when(
        Selector::role("chair").kind("chair_summary"),
        chair_summary("$source[0]", "$source[1]", "$source[2]"),
    ));
    s.push(ReplayEntry::when(Selector::default().kind("initial_assessment"), assessment(json!(["$source[0]"]))));
    s.push(ReplayEntry::when(Selector::default().kind("deliberation"), json!({"kind": "silence"})));
    s
}

/// The multi-agent script with the chair always citing `fake`.
pub fn hallucinating_chair_script(fake: &str) -> ReplayScript {
    let mut s = ReplayScript::new("scripted:hallucinating-chair");
    s.default_usage = DEFAULT_USAGE;
    s.push(ReplayEntry::when(
        Selector::role("chair").kind("chair_summary"),
        chair_summary("$evidence[0]", fake, "$evidence[1]"),
    ));
    s.push(ReplayEntry::when(Selector::default().kind("initial_assessment"), assessment(json!(["$evidence[0]"]))));
    s.push(ReplayEntry::when(Selector::default().kind("deliberation"), json!({"kind": "silence"})));
    s
}

pub fn write_script(path: &Path, script: &ReplayScript) {
    std::fs::write(path, serde_json::to_vec_pretty(script).unwrap()).unwrap();
}

pub struct Workspace {
    pub dir: TempDir,
    pub corpus: PathBuf,
    pub snapshot_dir: PathBuf,
    pub cases: Vec<PathBuf>,
    pub script: PathBuf,
}

impl Workspace {
    pub fn new() -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.jsonl");
        std::fs::write(&corpus, corpus_lines()).unwrap();
        let snapshot_dir = dir.path().join("snapshot");
        cmd_ingest(&IngestRequest {
            corpus: vec![corpus.clone()],
            out: snapshot_dir.clone(),
            config: IngestConfig {
                phase_label: "fixture".into(),
                ..IngestConfig::default()
            },
        })
        .unwrap();
        let cases = (0..CASES)
            .map(|i| {
                let (raw, case) = fixture_case(i);
                let d = dir.path().join("cases").join(&raw.case_id);
                write_case_packet(&raw, &d).unwrap();
                write_structured_case(&case, &d.join(STRUCTURED_CASE)).unwrap();
                d
            })
            .collect();
        let script = dir.path().join("omgs_script.json");
        write_script(&script, &omgs_script());
        Workspace {
            dir,
            corpus,
            snapshot_dir,
            cases,
            script,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn snapshot(&self) -> CorpusSnapshot {
        CorpusSnapshot::load(&self.snapshot_dir).unwrap()
    }

    pub fn backend_spec(&self) -> String {
        format!("scripted:{}", self.script.display())
    }
}
