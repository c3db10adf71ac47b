# Dataset ingestion
