#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use facetlit_core::corpus::{CorpusBuilder, CorpusConfig, RecordedBackend};
use facetlit_core::gateway::{Gateway, MockScript};
use facetlit_core::session::{Service, SessionStore, Settings};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn biomed_idea() -> String {
    std::fs::read_to_string(fixture("biomed/idea.txt")).unwrap().trim().to_string()
}

pub fn biomed_evaluation() -> String {
    std::fs::read_to_string(fixture("biomed/evaluation.txt")).unwrap().trim().to_string()
}

pub fn biomed_script() -> MockScript {
    MockScript::load(&fixture("biomed/mock_script.json")).unwrap()
}

pub fn biomed_backend() -> Arc<RecordedBackend> {
    Arc::new(RecordedBackend::load(&fixture("biomed/backend.json")).unwrap())
}

pub fn biomed_service(data_dir: &Path, settings: Settings) -> Service {
    let builder = CorpusBuilder::new(biomed_backend(), CorpusConfig::default());
    Service::new(Arc::new(Gateway::mock(biomed_script())), builder, SessionStore::new(data_dir).unwrap(), settings)
}
