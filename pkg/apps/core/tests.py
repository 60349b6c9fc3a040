import logging
import logging.config
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from .decorators import pipeline_stage
from .exceptions import (
    ArgumentError,
    ChecksumError,
    CompressiveMbnError,
    DivergenceError,
    FormatError,
    KindMismatchError,
    RaggedRowError,
    StageError,
)
from .logging_config import build_pipeline_logging
from .recovery import ErrorRecoveryManager


class ExitCodeTests(SimpleTestCase):
    """Error kinds map to the CLI exit codes"""

    def test_usage_errors_exit_with_one(self):
        self.assertEqual(ErrorRecoveryManager.exit_code_for(ArgumentError("bad flag")), 1)

    def test_data_errors_exit_with_two(self):
        for error in (FormatError("bad magic"), RaggedRowError(2, 3, 1), ChecksumError("crc")):
            self.assertEqual(ErrorRecoveryManager.exit_code_for(error), 2)

    def test_divergence_exits_with_three(self):
        self.assertEqual(ErrorRecoveryManager.exit_code_for(DivergenceError(4, float('nan'))), 3)

    def test_stage_error_keeps_the_cause_exit_code(self):
        error = StageError('distill', DivergenceError(2, float('inf')))
        self.assertEqual(ErrorRecoveryManager.exit_code_for(error), 3)
        self.assertIsInstance(ErrorRecoveryManager.root_cause(error), DivergenceError)

    def test_unexpected_errors_exit_with_two(self):
        self.assertEqual(ErrorRecoveryManager.exit_code_for(RuntimeError("boom")), 2)


class RecoveryOptionsTests(SimpleTestCase):

    def test_options_for_a_known_kind(self):
        options = ErrorRecoveryManager.get_recovery_options(KindMismatchError('mlp', 'pca'))

        self.assertEqual(options['error_type'], 'kind_mismatch')
        self.assertEqual(options['exit_code'], 2)
        self.assertIn('mlp', options['detail'])
        self.assertTrue(options['suggestions'])
        self.assertIsNone(options['stage'])

    def test_stage_name_prefixes_the_console_header(self):
        lines = ErrorRecoveryManager.format_for_console(StageError('empca', ArgumentError('target_dim 9')))

        self.assertTrue(lines[0].startswith('[empca] Invalid Argument: target_dim 9'))
        self.assertTrue(all(line.startswith('  - ') for line in lines[1:]))

    def test_unknown_kind_falls_back(self):
        options = ErrorRecoveryManager.get_recovery_options(CompressiveMbnError('odd'))
        self.assertEqual(options['title'], 'Unexpected Error')


class PipelineStageTests(SimpleTestCase):

    def test_result_passes_through(self):
        @pipeline_stage('sum')
        def add(a, b):
            return a + b

        with self.assertLogs('compressive_mbn.pipeline', level='INFO') as logs:
            self.assertEqual(add(2, 3), 5)
        self.assertTrue(any("Stage 'sum' finished" in line for line in logs.output))

    def test_library_errors_are_tagged_with_the_stage(self):
        @pipeline_stage('kmeans')
        def fail():
            raise ArgumentError('k must be at least 1')

        with self.assertLogs('compressive_mbn.pipeline', level='ERROR'):
            with self.assertRaises(StageError) as ctx:
                fail()
        self.assertEqual(ctx.exception.stage, 'kmeans')
        self.assertIsInstance(ctx.exception.cause, ArgumentError)

    def test_nested_stages_keep_the_inner_name(self):
        @pipeline_stage('inner')
        def inner():
            raise FormatError('bad')

        @pipeline_stage('outer')
        def outer():
            return inner()

        with self.assertLogs('compressive_mbn.pipeline', level='ERROR'):
            with self.assertRaises(StageError) as ctx:
                outer()
        self.assertEqual(ctx.exception.stage, 'inner')

    def test_other_exceptions_are_not_wrapped(self):
        @pipeline_stage('io')
        def crash():
            raise KeyError('missing')

        with self.assertRaises(KeyError):
            crash()


class LoggingConfigTests(SimpleTestCase):

    def test_handlers_write_inside_the_log_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = build_pipeline_logging(tmp, level='DEBUG')
            files = {
                name: Path(handler['filename'])
                for name, handler in config['handlers'].items()
                if 'filename' in handler
            }
            self.assertEqual(
                {path.name for path in files.values()}, {'pipeline.log', 'bench.log', 'audit.log'}
            )
            self.assertTrue(all(path.parent == Path(tmp) for path in files.values()))
            self.assertEqual(config['loggers']['compressive_mbn']['level'], 'DEBUG')

    def test_config_is_accepted_by_dict_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = build_pipeline_logging(tmp)
            logging.config.dictConfig(config)
            logger = logging.getLogger('compressive_mbn.audit')
            logger.info('run recorded', extra={'run_id': 'r1', 'status': 'completed'})
            # Detach the file handlers again before the directory is removed
            for name in ('compressive_mbn', 'compressive_mbn.bench', 'compressive_mbn.audit'):
                for handler in list(logging.getLogger(name).handlers):
                    handler.close()
                    logging.getLogger(name).removeHandler(handler)
            self.assertIn('Run: r1 Status: completed', (Path(tmp) / 'audit.log').read_text())
