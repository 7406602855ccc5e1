from setuptools import setup, find_packages
setup(
    name='lib-spacetime-dg',
    version='0.1.0',
    author='Sanaap Organization',
    author_email='',
    packages=find_packages(include=['lib_spacetime_dg', 'lib_spacetime_dg.*']),
    description='Tensor-product space-time cG(s)dG(r) finite elements for the heat equation',
    python_requires='>=3.9',
    install_requires=[
        'Django>=3.2',
        'djangorestframework>=3.12',
        'numpy>=1.22',
        'scipy>=1.12',
    ],
    extras_require={
        'test': ['pytest>=7'],
    },
    entry_points={
        'console_scripts': ['study=lib_spacetime_dg.cli:main'],
    },
)
