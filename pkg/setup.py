# -*- coding: utf-8 -*-

from setuptools import setup
import re

# https://stackoverflow.com/questions/458550/standard-way-to-embed-version-into-python-package#7071358
VERSIONFILE = "mmwtcp/_version.py"
verstrline = open(VERSIONFILE, "rt").read()
VSRE = r"^__version__ = ['\"]([^'\"]*)['\"]"
mo = re.search(VSRE, verstrline, re.M)
if mo:
    verstr = mo.group(1)
else:
    raise RuntimeError("Unable to find version string in %s." %
                       (VERSIONFILE,))

#http://stackoverflow.com/questions/10718767/have-the-same-readme-both-in-markdown-and-restructuredtext#23265673
try:
    from pypandoc import convert
    read_md = lambda f: convert(f, 'rst')
except ImportError:
    print("warning: pypandoc module not found, could not convert Markdown to RST")
    read_md = lambda f: open(f, 'r').read()

setup(name='mmwtcp',
      version=verstr,
      description='Discrete-event simulation of TCP and MP-TCP over mmWave '
                  'and LTE links',
      long_description=read_md('README.md'),
      license='MIT',
      platforms='any',
      python_requires='>=3.7',
      install_requires=['numpy>=1.17', 'pandas>=0.25.0', 'pyparsing>=2.2.0',
                        'joblib>=0.11'],
      tests_require=['pytest', 'hypothesis>=5.0'],
      extras_require={'test': ['pytest', 'hypothesis>=5.0']},
      packages=['mmwtcp', 'mmwtcp.tests'],
      test_suite='mmwtcp.tests',
      entry_points={'console_scripts': ['mmwtcp = mmwtcp.cli:run']},
      zip_safe=False)
