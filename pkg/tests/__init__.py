# Required to be able to "import tests.xxx" from tests
