//! Persistence contract and its in-memory and SQLite engines.

use std::collections::BTreeMap;
use std::path::Path;

use rusqlite::{params, Connection, OptionalExtension};

use super::types::{AnnotationRecord, Task, User};
use super::StoreError;

/// Durable state behind the store. Each method is atomic on its own.
pub trait Storage: Send {
    fn insert_user(&mut self, user: &User) -> Result<(), StoreError>;
    fn users(&self) -> Result<Vec<User>, StoreError>;
    fn task(&self, task_id: &str) -> Result<Option<Task>, StoreError>;
    fn tasks(&self) -> Result<Vec<Task>, StoreError>;
    /// Upserts `task` and appends `records` in one transaction.
    fn save_task(&mut self, task: &Task, records: &[AnnotationRecord]) -> Result<(), StoreError>;
    /// Records of one task in `seq` order.
    fn records(&self, task_id: &str) -> Result<Vec<AnnotationRecord>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryStorage {
    users: Vec<User>,
    tasks: BTreeMap<String, Task>,
    records: BTreeMap<String, Vec<AnnotationRecord>>,
}

impl Storage for MemoryStorage {
    fn insert_user(&mut self, user: &User) -> Result<(), StoreError> {
        self.users.push(user.clone());
        Ok(())
    }

    fn users(&self) -> Result<Vec<User>, StoreError> {
        Ok(self.users.clone())
    }

    fn task(&self, task_id: &str) -> Result<Option<Task>, StoreError> {
        Ok(self.tasks.get(task_id).cloned())
    }

    fn tasks(&self) -> Result<Vec<Task>, StoreError> {
        Ok(self.tasks.values().cloned().collect())
    }

    fn save_task(&mut self, task: &Task, records: &[AnnotationRecord]) -> Result<(), StoreError> {
        self.tasks.insert(task.task_id.clone(), task.clone());
        self.records.entry(task.task_id.clone()).or_default().extend_from_slice(records);
        Ok(())
    }

    fn records(&self, task_id: &str) -> Result<Vec<AnnotationRecord>, StoreError> {
        Ok(self.records.get(task_id).cloned().unwrap_or_default())
    }
}

/// Single-file SQLite database. Rows hold JSON bodies keyed by id.
#[derive(Debug)]
pub struct SqliteStorage {
    conn: Connection,
}

fn db(e: rusqlite::Error) -> StoreError {
    StoreError::Storage(e.to_string())
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, StoreError> {
    serde_json::to_string(value).map_err(|e| StoreError::Storage(e.to_string()))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, StoreError> {
    serde_json::from_str(text).map_err(|e| StoreError::Storage(format!("corrupt row: {e}")))
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS users (user_id TEXT PRIMARY KEY, name TEXT NOT NULL UNIQUE, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS tasks (task_id TEXT PRIMARY KEY, body TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS records (
    task_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY (task_id, seq)
);
";

impl SqliteStorage {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::init(Connection::open(path).map_err(db)?)
    }

    pub fn in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory().map_err(db)?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.pragma_update(None, "journal_mode", "WAL").map_err(db)?;
        conn.execute_batch(SCHEMA).map_err(db)?;
        Ok(Self { conn })
    }

    fn bodies(&self, sql: &str, key: Option<&str>) -> Result<Vec<String>, StoreError> {
        let mut stmt = self.conn.prepare(sql).map_err(db)?;
        let rows = match key {
            Some(k) => stmt.query_map([k], |r| r.get::<_, String>(0)).map_err(db)?.collect::<Result<Vec<_>, _>>(),
            None => stmt.query_map([], |r| r.get::<_, String>(0)).map_err(db)?.collect::<Result<Vec<_>, _>>(),
        };
        rows.map_err(db)
    }
}

impl Storage for SqliteStorage {
    fn insert_user(&mut self, user: &User) -> Result<(), StoreError> {
        self.conn
            .execute("INSERT INTO users (user_id, name, body) VALUES (?1, ?2, ?3)", params![user.user_id, user.name, json(user)?])
            .map_err(db)?;
        Ok(())
    }

    fn users(&self) -> Result<Vec<User>, StoreError> {
        self.bodies("SELECT body FROM users ORDER BY rowid", None)?.iter().map(|b| parse(b)).collect()
    }

    fn task(&self, task_id: &str) -> Result<Option<Task>, StoreError> {
        let body: Option<String> = self
            .conn
            .query_row("SELECT body FROM tasks WHERE task_id = ?1", [task_id], |r| r.get(0))
            .optional()
            .map_err(db)?;
        body.map(|b| parse(&b)).transpose()
    }

    fn tasks(&self) -> Result<Vec<Task>, StoreError> {
        self.bodies("SELECT body FROM tasks ORDER BY rowid", None)?.iter().map(|b| parse(b)).collect()
    }

    fn save_task(&mut self, task: &Task, records: &[AnnotationRecord]) -> Result<(), StoreError> {
        let tx = self.conn.transaction().map_err(db)?;
        tx.execute(
            "INSERT INTO tasks (task_id, body) VALUES (?1, ?2) ON CONFLICT(task_id) DO UPDATE SET body = excluded.body",
            params![task.task_id, json(task)?],
        )
        .map_err(db)?;
        for r in records {
            tx.execute("INSERT INTO records (task_id, seq, body) VALUES (?1, ?2, ?3)", params![task.task_id, r.seq as i64, json(r)?])
                .map_err(db)?;
        }
        tx.commit().map_err(db)
    }

    fn records(&self, task_id: &str) -> Result<Vec<AnnotationRecord>, StoreError> {
        self.bodies("SELECT body FROM records WHERE task_id = ?1 ORDER BY seq", Some(task_id))?.iter().map(|b| parse(b)).collect()
    }
}
