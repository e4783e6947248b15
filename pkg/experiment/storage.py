"""
结果存档模块
使用 SQLite 数据库保存每次运行的配置与结果表
"""
import json
from contextlib import contextmanager
from typing import Any, Dict, Optional

import pandas as pd
from sqlalchemy import create_engine, text
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker


class ResultStorage:
    """运行结果存储类"""

    def __init__(self, db_path: str = "results.db"):
        """
        初始化存储实例

        Args:
            db_path: 数据库文件路径
        """
        self.db_path = db_path
        self.engine: Engine = create_engine(f"sqlite:///{db_path}", echo=False)
        self.Session = sessionmaker(bind=self.engine)
        self.create_tables()

    @contextmanager
    def session_scope(self):
        """提供事务性会话"""
        session = self.Session()
        try:
            yield session
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def create_tables(self):
        """创建数据库表"""
        with self.engine.connect() as conn:
            conn.execute(text("""
                CREATE TABLE IF NOT EXISTS runs (
                    config_hash TEXT NOT NULL,
                    workflow TEXT NOT NULL,
                    seed INTEGER,
                    tool_version TEXT,
                    config_json TEXT,
                    PRIMARY KEY (config_hash, workflow)
                )
            """))
            conn.execute(text("""
                CREATE TABLE IF NOT EXISTS result_rows (
                    config_hash TEXT NOT NULL,
                    table_name TEXT NOT NULL,
                    row_index INTEGER NOT NULL,
                    row_json TEXT,
                    PRIMARY KEY (config_hash, table_name, row_index)
                )
            """))
            conn.commit()

    def save_rows(self, table: str, data: pd.DataFrame, meta: Dict[str, Any],
                  config: Optional[Dict[str, Any]] = None):
        """
        保存一张结果表

        同一 config_hash 重复运行时覆盖原记录。

        Args:
            table: 表名（工作流名）
            data: 结果 DataFrame
            meta: 运行元数据（config_hash, seed, tool_version）
            config: 解析后的配置
        """
        with self.session_scope() as session:
            session.execute(text("""
                INSERT OR REPLACE INTO runs
                (config_hash, workflow, seed, tool_version, config_json)
                VALUES (:config_hash, :workflow, :seed, :tool_version, :config_json)
            """), {
                'config_hash': meta['config_hash'],
                'workflow': table,
                'seed': meta['seed'],
                'tool_version': meta['tool_version'],
                'config_json': json.dumps(config or {}, sort_keys=True),
            })
            session.execute(text("""
                DELETE FROM result_rows WHERE config_hash = :config_hash AND table_name = :table
            """), {'config_hash': meta['config_hash'], 'table': table})
            for idx, row in enumerate(data.to_dict(orient="records")):
                session.execute(text("""
                    INSERT OR REPLACE INTO result_rows
                    (config_hash, table_name, row_index, row_json)
                    VALUES (:config_hash, :table, :row_index, :row_json)
                """), {
                    'config_hash': meta['config_hash'],
                    'table': table,
                    'row_index': idx,
                    'row_json': json.dumps(row, sort_keys=True, default=str),
                })

    def get_runs(self) -> pd.DataFrame:
        """
        获取所有已存档的运行

        Returns:
            DataFrame
        """
        with self.engine.connect() as conn:
            result = conn.execute(text("""
                SELECT config_hash, workflow, seed, tool_version FROM runs
                ORDER BY workflow, config_hash
            """)).fetchall()
            columns = ['config_hash', 'workflow', 'seed', 'tool_version']
            return pd.DataFrame([tuple(r) for r in result], columns=columns)

    def get_rows(self, config_hash: str, table: str) -> pd.DataFrame:
        """
        读取某次运行的结果表

        Args:
            config_hash: 配置哈希
            table: 表名

        Returns:
            DataFrame，无记录时为空
        """
        with self.engine.connect() as conn:
            result = conn.execute(text("""
                SELECT row_json FROM result_rows
                WHERE config_hash = :config_hash AND table_name = :table
                ORDER BY row_index
            """), {'config_hash': config_hash, 'table': table}).fetchall()
            if not result:
                return pd.DataFrame()
            return pd.DataFrame([json.loads(r[0]) for r in result])

    def get_run_count(self) -> int:
        with self.engine.connect() as conn:
            result = conn.execute(text("SELECT COUNT(*) FROM runs")).fetchone()
            return result[0] if result else 0
