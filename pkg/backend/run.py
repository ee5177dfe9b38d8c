#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
propsynth 命令行启动脚本

使用方法：
1. 推断性质：python run.py infer fixtures/vit_mlp.json
2. 合成算子链：python run.py synth fixtures/depth4_target.json --seed 0 --out out/synth
3. 演化搜索：python run.py evolve fixtures/cnn2.json --seed 0 --config fixtures/demo_config.json --out out/evolve
4. 交叉检查：python run.py oracle-check

注意：
- 日志级别由环境变量 PROPSYNTH_LOG 或 --log-level 控制
- synth / evolve 必须给出 --seed
"""

from propsynth.commands import main

if __name__ == '__main__':
    main()
