import os
from glob import glob

import pycodestyle

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def _glob(pattern):
    return sorted(glob(os.path.join(ROOT, pattern), recursive=True))


class TestCodeFormat:
    def setup_method(self):
        # set max line length to something more accommodating.
        self.style = pycodestyle.StyleGuide(max_line_length=100)

    def _test_conformance_in_files(self, filenames):
        assert len(filenames) != 0
        result = self.style.check_files(filenames)
        assert result.total_errors == 0, "Found code style errors (and warnings)."

    def test_1_revertgraph_pep8_conformance(self):
        """Test that the revertgraph package conforms to PEP8."""
        self._test_conformance_in_files(_glob('revertgraph/*.py'))

    def test_2_subpackages_pep8_conformance(self):
        """Test that processing, analysis and utils conform to PEP8."""
        for package in ('processing', 'analysis', 'utils'):
            self._test_conformance_in_files(_glob('revertgraph/{0}/*.py'.format(package)))

    def test_3_installation_pep8_conformance(self):
        """Test that settings and scripts conform to PEP8."""
        self._test_conformance_in_files(_glob('revertgraph/installation/**/*.py'))

    def test_4_tests_pep8_conformance(self):
        """Test that all tests conform to PEP8."""
        for directory in ('unit', 'functional', 'benchmark', 'pep8_tests'):
            self._test_conformance_in_files(_glob('tests/{0}/*.py'.format(directory)))

    def test_5_setup_pep8_conformance(self):
        """Test that setup.py conforms to PEP8."""
        self._test_conformance_in_files(_glob('*.py'))
