# apps/core/recovery.py

"""
Error Recovery Management
Maps library error kinds to CLI exit codes and recovery suggestions
"""

from typing import Dict, List, Any

from django.utils import timezone

from .exceptions import CompressiveMbnError, StageError


class ErrorRecoveryManager:
    """
    Manages recovery suggestions and exit codes for the error kinds raised by
    the compressive MBN apps
    """

    RECOVERY_STRATEGIES = {
        'invalid_argument': {
            'title': 'Invalid Argument',
            'message': 'A parameter or config value is out of range.',
            'exit_code': 1,
            'suggestions': [
                'Check the --config file against the preset keys in settings.COMPRESSIVE_MBN',
                'Run the command with --help to list accepted flags',
            ],
        },
        'data_error': {
            'title': 'Input Not Usable',
            'message': 'The input data cannot be read or used as given.',
            'exit_code': 2,
            'suggestions': ['Check that the path exists and is readable'],
        },
        'format_error': {
            'title': 'Unreadable Input File',
            'message': 'The input file does not follow the expected format.',
            'exit_code': 2,
            'suggestions': [
                'IDX files must be the uncompressed MNIST layout (gunzip first)',
                'Only 1-D label files and 3-D image files are supported',
            ],
        },
        'length_mismatch': {
            'title': 'Truncated Input File',
            'message': 'The payload is shorter or longer than its header declares.',
            'exit_code': 2,
            'suggestions': ['Download the file again and compare its size'],
        },
        'ragged_row': {
            'title': 'Ragged CSV',
            'message': 'A CSV row has a different number of cells than the first row.',
            'exit_code': 2,
            'suggestions': ['Fix the reported line', 'Pass --has-header if the first line is a header'],
        },
        'cell_parse': {
            'title': 'Non-numeric CSV Cell',
            'message': 'A CSV cell could not be parsed as a finite number.',
            'exit_code': 2,
            'suggestions': ['Fix the reported line', 'Pass --has-header if the first line is a header'],
        },
        'dimension_mismatch': {
            'title': 'Dimension Mismatch',
            'message': 'The data does not have the column count the model was trained on.',
            'exit_code': 2,
            'suggestions': ['Use the same preprocessing and feature layout as at training time'],
        },
        'insufficient_samples': {
            'title': 'Not Enough Samples',
            'message': 'There are fewer rows than requested centers or clusters.',
            'exit_code': 2,
            'suggestions': [
                'Reduce the k schedule so every k is at most the number of training rows',
                'Use more training data',
            ],
        },
        'container_error': {
            'title': 'Unreadable Model Container',
            'message': 'The model file is not a valid CMBN container.',
            'exit_code': 2,
            'suggestions': ['Re-save the model with the current version'],
        },
        'checksum_error': {
            'title': 'Corrupted Model Container',
            'message': 'A container section failed its checksum or is truncated.',
            'exit_code': 2,
            'suggestions': ['Copy the model file again', 'Retrain and save the model'],
        },
        'kind_mismatch': {
            'title': 'Wrong Model Kind',
            'message': 'The container holds a different kind of model than this command needs.',
            'exit_code': 2,
            'suggestions': ['Check which --model file is passed to which flag'],
        },
        'divergence': {
            'title': 'Training Diverged',
            'message': 'The student network produced a non-finite loss.',
            'exit_code': 3,
            'suggestions': [
                'Lower the MLP learning rate',
                'Check that the input was normalized (entries divided by 255)',
            ],
        },
        'unknown_error': {
            'title': 'Unexpected Error',
            'message': 'An unexpected error occurred.',
            'exit_code': 2,
            'suggestions': ['Re-run with --verbosity 2 and check logs/pipeline.log'],
        },
    }

    @classmethod
    def root_cause(cls, error: BaseException) -> BaseException:
        """Unwrap StageError layers down to the library error that caused them"""
        while isinstance(error, StageError):
            error = error.cause
        return error

    @classmethod
    def get_recovery_options(cls, error: BaseException) -> Dict[str, Any]:
        """
        Get recovery options for an error raised by a pipeline command

        Returns:
            Dictionary with title, message, exit code, suggestions and stage
        """
        cause = cls.root_cause(error)
        error_type = getattr(cause, 'error_type', 'unknown_error')
        strategy = cls.RECOVERY_STRATEGIES.get(error_type)
        if strategy is None:
            # Subclasses without their own entry fall back to their kind's parent
            strategy = cls.RECOVERY_STRATEGIES['unknown_error']
            for klass in type(cause).__mro__:
                parent_type = getattr(klass, 'error_type', None)
                if parent_type in cls.RECOVERY_STRATEGIES:
                    strategy = cls.RECOVERY_STRATEGIES[parent_type]
                    break

        return {
            'error_type': error_type,
            'title': strategy['title'],
            'message': strategy['message'],
            'detail': str(cause),
            'stage': getattr(error, 'stage', None),
            'exit_code': cls.exit_code_for(error),
            'suggestions': list(strategy['suggestions']),
            'timestamp': timezone.now().isoformat(),
        }

    @classmethod
    def exit_code_for(cls, error: BaseException) -> int:
        """CLI exit code: 1 usage, 2 data/format, 3 divergence"""
        if isinstance(error, CompressiveMbnError):
            return error.exit_code
        return 2

    @classmethod
    def format_for_console(cls, error: BaseException) -> List[str]:
        """Lines printed to stderr by the management commands"""
        options = cls.get_recovery_options(error)
        header = f"{options['title']}: {options['detail']}"
        if options['stage']:
            header = f"[{options['stage']}] {header}"
        lines = [header]
        lines.extend(f"  - {tip}" for tip in options['suggestions'])
        return lines
